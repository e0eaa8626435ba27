#ifndef GNNEAR_ISA_H_
#define GNNEAR_ISA_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "gnnear/hw_config.h"

namespace gnnear::isa {

// Word layout: opcode[63:62] | dimm[61:58] | payload[57:0].
enum class Opcode : uint8_t { kLoad = 0, kCompute = 1, kRead = 2, kExt = 3 };

enum class AggOp : uint8_t { kWeightedSum = 0, kSum = 1, kMean = 2 };

inline constexpr uint64_t kMaxDaddr = 1ull << 40;
inline constexpr uint32_t kMaxVectorSize = 1u << 12;
inline constexpr uint32_t kMaxDstIndex = 1u << 8;
inline constexpr uint32_t kMaxDimm = 15;

struct LType {
  uint8_t dimm = 0;
  uint64_t daddr = 0;
  uint32_t vector_size = 0;
  bool operator==(const LType&) const = default;
};

struct CType {
  uint8_t dimm = 0;
  AggOp op = AggOp::kWeightedSum;
  uint16_t edge_w = 0;  // BF16 bits
  uint16_t dst_index = 0;
  bool operator==(const CType&) const = default;
};

struct RType {
  uint8_t dimm = 0;
  uint16_t dst_index = 0;
  uint32_t vector_size = 0;
  bool operator==(const RType&) const = default;
};

// Channel-scoped broadcast marker; the DIMM field is ignored.
struct BType {
  bool operator==(const BType&) const = default;
};

using Instruction = std::variant<LType, CType, RType, BType>;

uint64_t encode(const Instruction& instr);
Instruction decode(uint64_t word);
std::string to_string(const Instruction& instr);

// Per-rank sub-vector load; vector_size in bytes.
uint64_t l_type_latency(uint32_t vector_size, bool row_hit,
                        const TimingParams& t);

struct FixedLatencies {
  uint64_t nme_cd_eu_cycles;  // C-type, NME clock
  uint64_t nme_cd;            // C-type, memory clock
  uint64_t nme_rd;            // R-type bus occupancy, memory clock
};

FixedLatencies fixed_latencies(uint32_t d_elements, uint32_t vector_bytes,
                               const NmeConfig& nme, const TimingParams& t);

struct TraceEntry {
  uint8_t channel = 0;
  uint64_t word = 0;
  bool operator==(const TraceEntry&) const = default;
};

void write_trace(std::ostream& out, const std::vector<uint64_t>& words);
std::vector<uint64_t> read_trace(std::istream& in);

}  // namespace gnnear::isa

#endif  // GNNEAR_ISA_H_
