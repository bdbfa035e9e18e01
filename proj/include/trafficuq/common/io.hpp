#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace tuq {

using Json = nlohmann::ordered_json;

/// Writes through a sibling temp file and renames it into place, so readers
/// never observe a partial file. Throws std::invalid_argument when the parent
/// directory does not exist.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// Canonical JSON text: 2-space indent and trailing newline. Doubles are
/// printed with round-trip precision, so dump(parse(dump(x))) == dump(x).
std::string dump_json(const Json& doc);

Json read_json(const std::filesystem::path& path);

/// Encodes +inf as the string "inf" since JSON has no infinity literal.
Json json_number(double v);
double json_to_double(const Json& v);

}  // namespace tuq
