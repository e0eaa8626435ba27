#ifndef GNNEAR_BF16_H_
#define GNNEAR_BF16_H_

#include <bit>
#include <cstdint>

namespace gnnear {

// Round-to-nearest-even truncation of an IEEE single to its upper half.
inline uint16_t float_to_bf16(float f) {
  uint32_t bits = std::bit_cast<uint32_t>(f);
  if ((bits & 0x7f800000u) == 0x7f800000u && (bits & 0x007fffffu) != 0) {
    return static_cast<uint16_t>((bits >> 16) | 0x0040u);  // quiet NaN
  }
  uint32_t lsb = (bits >> 16) & 1u;
  bits += 0x7fffu + lsb;
  return static_cast<uint16_t>(bits >> 16);
}

inline float bf16_to_float(uint16_t h) {
  return std::bit_cast<float>(static_cast<uint32_t>(h) << 16);
}

inline float round_bf16(float f) { return bf16_to_float(float_to_bf16(f)); }

enum class Precision : uint8_t { kFp32, kBf16 };

inline uint32_t element_bytes(Precision p) {
  return p == Precision::kBf16 ? 2 : 4;
}

inline float round_store(double x, Precision p) {
  float f = static_cast<float>(x);
  return p == Precision::kBf16 ? round_bf16(f) : f;
}

}  // namespace gnnear

#endif  // GNNEAR_BF16_H_
