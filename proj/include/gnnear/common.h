#ifndef GNNEAR_COMMON_H_
#define GNNEAR_COMMON_H_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace gnnear {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define GNNEAR_ERROR(Name)                  \
  class Name : public Error {               \
   public:                                  \
    using Error::Error;                     \
  }

GNNEAR_ERROR(InputError);
GNNEAR_ERROR(DomainError);
GNNEAR_ERROR(ParamError);
GNNEAR_ERROR(ConfigError);
GNNEAR_ERROR(CapacityError);
GNNEAR_ERROR(EncodeError);
GNNEAR_ERROR(DecodeError);
GNNEAR_ERROR(ProtocolError);
GNNEAR_ERROR(MappingError);
GNNEAR_ERROR(StateError);
GNNEAR_ERROR(ComparisonError);

#undef GNNEAR_ERROR

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Seeded generator with platform-independent range mapping. The standard
// distributions are implementation-defined, which would break frozen values.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next() { return eng_(); }

  // Uniform in [0, n). n must be positive.
  uint64_t below(uint64_t n) {
    unsigned __int128 m = static_cast<unsigned __int128>(eng_()) * n;
    return static_cast<uint64_t>(m >> 64);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::mt19937_64 eng_;
};

// Simulation time base. One tick is 1/42 ns, the common period of the
// 1200 MHz memory clock (35 ticks), the 500 MHz NME clock (84 ticks) and
// the 700 MHz CAE clock (60 ticks), so every stamp is an exact integer.
using Tick = uint64_t;
inline constexpr Tick kTicksPerNs = 42;
inline constexpr Tick kMemCycleTicks = 35;
inline constexpr Tick kNmeCycleTicks = 84;
inline constexpr Tick kCaeCycleTicks = 60;

inline constexpr uint64_t ceil_div(uint64_t a, uint64_t b) {
  return (a + b - 1) / b;
}

}  // namespace gnnear

#endif  // GNNEAR_COMMON_H_
