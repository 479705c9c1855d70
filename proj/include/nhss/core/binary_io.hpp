#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "nhss/core/error.hpp"

namespace nhss {

namespace detail {
inline std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t out = 0;
  for (int i = 0; i < 8; ++i) out |= ((v >> (8 * i)) & 0xFF) << (8 * (7 - i));
  return out;
}
}  // namespace detail

/// Raw little-endian IEEE-754 doubles, no header.
inline void write_doubles_le(const std::filesystem::path& path, std::span<const double> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  std::vector<std::uint64_t> buf(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    buf[i] = detail::to_little_endian(std::bit_cast<std::uint64_t>(values[i]));
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 8));
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::vector<double> read_doubles_le(const std::filesystem::path& path, std::size_t expected) {
  std::error_code ec;
  const auto bytes = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("missing tensor file " + path.string());
  if (bytes != expected * 8)
    throw IoError("size mismatch in " + path.string() + ": " + std::to_string(bytes) + " bytes, expected " +
                  std::to_string(expected * 8));
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint64_t> buf(expected);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(expected * 8));
  if (!in) throw IoError("short read: " + path.string());
  std::vector<double> out(expected);
  for (std::size_t i = 0; i < expected; ++i) out[i] = std::bit_cast<double>(detail::to_little_endian(buf[i]));
  return out;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace nhss
