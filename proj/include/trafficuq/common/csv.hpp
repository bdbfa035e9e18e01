#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "trafficuq/common/panel.hpp"

namespace tuq {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t column_index(const std::string& name) const;
};

std::string to_csv(const CsvTable& table);
CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// Long format: columns (time, node, <value_name>), one line per cell,
/// time-major order.
CsvTable panel_to_long(const Panel& panel, const std::string& value_name);
Panel long_to_panel(const CsvTable& table, const std::string& value_name);

}  // namespace tuq
