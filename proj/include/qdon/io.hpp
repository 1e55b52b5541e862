#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace qdon {

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never observe a half-written artifact.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// Splits CSV text into rows of fields (no quoting; the artifacts written by
/// this library never contain commas inside fields).
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

double parse_double(std::string_view s);
long long parse_int(std::string_view s);

}  // namespace qdon
