#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace pmpc::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

template <typename T>
void put(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  static_assert(std::is_trivially_copyable_v<T>);
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("unexpected end of file");
  return value;
}

inline void put_magic(std::ostream& out, const char (&magic)[9]) { out.write(magic, 8); }

inline void expect_magic(std::istream& in, const char (&magic)[9]) {
  char buf[8];
  in.read(buf, 8);
  if (!in || std::memcmp(buf, magic, 8) != 0)
    throw std::runtime_error(std::string("bad magic, expected ") + magic);
}

/// Row-major bits, LSB first within each byte.
inline std::vector<std::uint8_t> pack_bits(const std::vector<std::uint8_t>& cells) {
  std::vector<std::uint8_t> bytes((cells.size() + 7) / 8, 0);
  for (std::size_t k = 0; k < cells.size(); ++k)
    if (cells[k]) bytes[k / 8] |= static_cast<std::uint8_t>(1u << (k % 8));
  return bytes;
}

inline std::vector<std::uint8_t> unpack_bits(const std::vector<std::uint8_t>& bytes,
                                             std::size_t count) {
  std::vector<std::uint8_t> cells(count);
  for (std::size_t k = 0; k < count; ++k) cells[k] = (bytes[k / 8] >> (k % 8)) & 1u;
  return cells;
}

}  // namespace pmpc::io
