#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "membench/error.hpp"

// Little-endian scalar I/O shared by the checkpoint and raster formats.
namespace membench::io {

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

// Returns false on clean EOF before the first byte; throws on a short read.
template <typename T>
bool try_get_le(std::istream& in, T& value, const char* what) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  const auto got = static_cast<std::size_t>(in.gcount());
  if (got == 0 && in.eof()) return false;
  if (got != sizeof(T)) {
    throw FormatError(std::string("truncated ") + what + ": expected " + std::to_string(sizeof(T)) +
                      " bytes, got " + std::to_string(got));
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  std::memcpy(&value, bytes, sizeof(T));
  return true;
}

template <typename T>
T get_le(std::istream& in, const char* what) {
  T value{};
  if (!try_get_le(in, value, what)) throw FormatError(std::string("unexpected end of file reading ") + what);
  return value;
}

}  // namespace membench::io
