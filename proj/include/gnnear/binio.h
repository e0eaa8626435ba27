#ifndef GNNEAR_BINIO_H_
#define GNNEAR_BINIO_H_

#include <cstdint>
#include <istream>
#include <ostream>
#include <string_view>

#include "gnnear/common.h"

namespace gnnear::binio {

template <typename T>
void put(std::ostream& out, T value) {
  char bytes[sizeof(T)];
  auto bits = static_cast<uint64_t>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  }
  out.write(bytes, sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw InputError("truncated binary stream");
  }
  uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bits |= static_cast<uint64_t>(bytes[i]) << (8 * i);
  }
  return static_cast<T>(bits);
}

inline void put_magic(std::ostream& out, std::string_view magic) {
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void expect_magic(std::istream& in, std::string_view magic) {
  char buf[8] = {};
  if (!in.read(buf, static_cast<std::streamsize>(magic.size())) ||
      std::string_view(buf, magic.size()) != magic) {
    throw InputError("bad magic, expected " + std::string(magic));
  }
}

}  // namespace gnnear::binio

#endif  // GNNEAR_BINIO_H_
