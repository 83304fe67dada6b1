#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace phel {

// 16-bit binary PGM (P5, big-endian samples), values mapped linearly from
// [0, max(data)] to [0, 65535]. Rows run from the top: row r is electron cell
// j = n-1-r, columns are photon cells left to right.
void write_pgm16(const std::filesystem::path& path, const std::vector<double>& data, int n);

// Matrix CSV, one row per electron cell j ascending, columns photon cells i
// ascending, %.17g formatting.
void write_matrix_csv(const std::filesystem::path& path, const std::vector<double>& data, int n);

std::string format_double(double v); // shortest %.17g round-trip text

std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t fnv1a64_file(const std::filesystem::path& path);
std::string to_hex(std::uint64_t value);

} // namespace phel
