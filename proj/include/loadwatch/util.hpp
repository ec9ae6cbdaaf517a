#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace loadwatch {

// Shortest round-trip decimal representation of a double ("1.5", "0.1", ...).
// Used for all emitted CSV/JSON numbers so that repeated runs are byte-identical.
std::string fmt_double(double v);

// Splits one CSV line on commas. No quoting support; REFIT and our own
// intermediate files never quote fields. A trailing '\r' is stripped.
std::vector<std::string> split_csv_line(std::string_view line);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Writes content to path via a temporary file in the same directory plus
// rename, so readers never observe a partial file.
void atomic_write_file(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

// Little-endian packing for the parameter container format.
void append_u32_le(std::string& out, std::uint32_t v);
void append_u64_le(std::string& out, std::uint64_t v);
void append_f64_le(std::string& out, double v);
std::uint32_t read_u32_le(std::string_view buf, std::size_t& pos);
std::uint64_t read_u64_le(std::string_view buf, std::size_t& pos);
double read_f64_le(std::string_view buf, std::size_t& pos);

} // namespace loadwatch
