#pragma once

// Minimal delimited-text helpers shared by every file writer and reader.
// Doubles are written with 17 significant digits so they round-trip exactly.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace difflab {

std::string format_double(double value);

/// Splits one line on commas; no quoting (none of our fields need it).
std::vector<std::string_view> split_fields(std::string_view line);

double parse_double(std::string_view field, std::string_view context);
std::int64_t parse_int(std::string_view field, std::string_view context);

std::ofstream open_for_write(const std::filesystem::path& path);
std::ifstream open_for_read(const std::filesystem::path& path);

/// Reads all lines, checking the first against an expected header.
std::vector<std::string> read_table(const std::filesystem::path& path,
                                    std::string_view expected_header);

}  // namespace difflab
