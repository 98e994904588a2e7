#pragma once

// Byte-level helpers shared by the dataset and checkpoint formats.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace forgenet::io {

std::string crc32_hex(std::span<const unsigned char> bytes);

void append_le(std::vector<unsigned char>& out, double value);

inline double decode_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  return std::bit_cast<double>(bits);
}

// Throw DataError on failure.
std::vector<unsigned char> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const void* data, std::size_t n);
void write_text(const std::filesystem::path& path, const std::string& text);
void ensure_directory(const std::filesystem::path& dir);

}  // namespace forgenet::io
