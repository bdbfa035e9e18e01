#include "trafficuq/common/csv.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "trafficuq/common/io.hpp"

namespace tuq {

std::string format_double(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

std::size_t CsvTable::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) {
            return i;
        }
    }
    throw std::invalid_argument("CSV column not found: " + name);
}

std::string to_csv(const CsvTable& table) {
    std::string out;
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        out += (i ? "," : "") + table.header[i];
    }
    out += '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) {
                out += ',';
            }
            out += format_double(row[i]);
        }
        out += '\n';
    }
    return out;
}

namespace {

double parse_cell(const std::string& cell, std::size_t line) {
    if (cell == "inf") {
        return INFINITY;
    }
    if (cell == "-inf") {
        return -INFINITY;
    }
    if (cell == "nan") {
        return NAN;
    }
    double v = 0.0;
    auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size()) {
        throw std::invalid_argument("CSV line " + std::to_string(line) + ": not a number: '" + cell + "'");
    }
    return v;
}

}  // namespace

CsvTable parse_csv(const std::string& text) {
    CsvTable table;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            cells.push_back(cell);
        }
        if (table.header.empty()) {
            table.header = std::move(cells);
            continue;
        }
        if (cells.size() != table.header.size()) {
            throw std::invalid_argument("CSV line " + std::to_string(lineno) + ": expected " +
                                        std::to_string(table.header.size()) + " fields");
        }
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) {
            row.push_back(parse_cell(c, lineno));
        }
        table.rows.push_back(std::move(row));
    }
    if (table.header.empty()) {
        throw std::invalid_argument("CSV input is empty");
    }
    return table;
}

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_file(path)); }

void write_csv(const std::filesystem::path& path, const CsvTable& table) { write_file_atomic(path, to_csv(table)); }

CsvTable panel_to_long(const Panel& panel, const std::string& value_name) {
    CsvTable table;
    table.header = {"time", "node", value_name};
    table.rows.reserve(panel.steps * panel.nodes);
    for (std::size_t t = 0; t < panel.steps; ++t) {
        for (std::size_t n = 0; n < panel.nodes; ++n) {
            table.rows.push_back({static_cast<double>(t), static_cast<double>(n), panel.at(t, n)});
        }
    }
    return table;
}

Panel long_to_panel(const CsvTable& table, const std::string& value_name) {
    const auto ti = table.column_index("time");
    const auto ni = table.column_index("node");
    const auto vi = table.column_index(value_name);
    double tmax = -1.0;
    double nmax = -1.0;
    for (const auto& row : table.rows) {
        if (row[ti] < 0 || row[ni] < 0 || row[ti] != std::floor(row[ti]) || row[ni] != std::floor(row[ni])) {
            throw std::invalid_argument("CSV time/node must be nonnegative integers");
        }
        tmax = std::max(tmax, row[ti]);
        nmax = std::max(nmax, row[ni]);
    }
    Panel panel(static_cast<std::size_t>(tmax + 1), static_cast<std::size_t>(nmax + 1), NAN);
    for (const auto& row : table.rows) {
        panel.at(static_cast<std::size_t>(row[ti]), static_cast<std::size_t>(row[ni])) = row[vi];
    }
    for (double v : panel.values) {
        if (std::isnan(v)) {
            throw std::invalid_argument("CSV panel has missing (time, node) entries");
        }
    }
    return panel;
}

}  // namespace tuq
