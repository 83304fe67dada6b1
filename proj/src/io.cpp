#include "phel/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "phel/errors.hpp"

namespace phel {

void write_pgm16(const std::filesystem::path& path, const std::vector<double>& data, int n) {
  if (data.size() != static_cast<std::size_t>(n) * n)
    throw ValidationError("write_pgm16: data size does not match the grid");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_pgm16: cannot open " + path.string());

  const double peak = data.empty() ? 0.0 : *std::max_element(data.begin(), data.end());
  const double scale = peak > 0.0 ? 65535.0 / peak : 0.0;

  out << "P5\n" << n << " " << n << "\n65535\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(n) * 2);
  for (int r = 0; r < n; ++r) {
    const int j = n - 1 - r; // electron axis grows upward in the image
    for (int i = 0; i < n; ++i) {
      const double v = data[static_cast<std::size_t>(i) * n + j];
      const unsigned value =
          static_cast<unsigned>(std::clamp(v * scale + 0.5, 0.0, 65535.0));
      row[2 * i] = static_cast<unsigned char>((value >> 8) & 0xFF);
      row[2 * i + 1] = static_cast<unsigned char>(value & 0xFF);
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw IoError("write_pgm16: write failed for " + path.string());
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_matrix_csv(const std::filesystem::path& path, const std::vector<double>& data, int n) {
  if (data.size() != static_cast<std::size_t>(n) * n)
    throw ValidationError("write_matrix_csv: data size does not match the grid");
  std::ofstream out(path);
  if (!out) throw IoError("write_matrix_csv: cannot open " + path.string());
  std::string line;
  for (int j = 0; j < n; ++j) {
    line.clear();
    for (int i = 0; i < n; ++i) {
      if (i) line.push_back(',');
      line += format_double(data[static_cast<std::size_t>(i) * n + j]);
    }
    line.push_back('\n');
    out << line;
  }
  if (!out) throw IoError("write_matrix_csv: write failed for " + path.string());
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t hash = 0xCBF29CE484222325ull;
  for (std::size_t k = 0; k < size; ++k) {
    hash ^= bytes[k];
    hash *= 0x100000001B3ull;
  }
  return hash;
}

std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("fnv1a64_file: cannot open " + path.string());
  std::uint64_t hash = 0xCBF29CE484222325ull;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    const std::streamsize got = in.gcount();
    for (std::streamsize k = 0; k < got; ++k) {
      hash ^= static_cast<unsigned char>(buf[k]);
      hash *= 0x100000001B3ull;
    }
  }
  return hash;
}

std::string to_hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

} // namespace phel
