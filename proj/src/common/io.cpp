#include "trafficuq/common/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

namespace tuq {

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    const auto parent = path.has_parent_path() ? path.parent_path() : std::filesystem::path{"."};
    if (!std::filesystem::is_directory(parent)) {
        throw std::invalid_argument("output directory does not exist: " + parent.string());
    }
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot open for writing: " + tmp.string());
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) {
            throw std::runtime_error("write failed: " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::invalid_argument("cannot read file: " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string dump_json(const Json& doc) { return doc.dump(2) + "\n"; }

Json read_json(const std::filesystem::path& path) {
    try {
        return Json::parse(read_file(path));
    } catch (const Json::parse_error& e) {
        throw std::invalid_argument("malformed JSON in " + path.string() + ": " + e.what());
    }
}

Json json_number(double v) {
    if (std::isinf(v)) {
        return v > 0 ? Json("inf") : Json("-inf");
    }
    return Json(v);
}

double json_to_double(const Json& v) {
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "inf") {
            return std::numeric_limits<double>::infinity();
        }
        if (s == "-inf") {
            return -std::numeric_limits<double>::infinity();
        }
        throw std::invalid_argument("expected number, got string: " + s);
    }
    return v.get<double>();
}

}  // namespace tuq
