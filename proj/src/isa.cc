#include "gnnear/isa.h"

#include <istream>
#include <ostream>
#include <sstream>

#include "gnnear/bf16.h"
#include "gnnear/binio.h"
#include "gnnear/common.h"

namespace gnnear::isa {

namespace {

constexpr int kOpShift = 62;
constexpr int kDimmShift = 58;
constexpr uint64_t kPayloadMask = (1ull << 58) - 1;

// Payload fields, low bit first.
constexpr int kSizeBits = 13;
constexpr int kDaddrBits = 41;
constexpr int kDstBits = 9;
constexpr int kWeightBits = 16;
constexpr int kAggBits = 4;
constexpr int kSubopBits = 8;
constexpr uint64_t kSubopBroadcast = 0;

uint64_t mask(int bits) { return (1ull << bits) - 1; }

void check_dimm(uint8_t dimm) {
  if (dimm > kMaxDimm) throw EncodeError("dimm field overflow");
}

void check_size(uint32_t size) {
  if (size == 0 || size > kMaxVectorSize || size % 2 != 0) {
    throw EncodeError("vector_size must be an even byte count in [2, 4096]");
  }
}

void check_dst(uint32_t dst) {
  if (dst > kMaxDstIndex) throw EncodeError("dst_index field overflow");
}

uint64_t head(Opcode op, uint8_t dimm) {
  return (static_cast<uint64_t>(op) << kOpShift) |
         (static_cast<uint64_t>(dimm) << kDimmShift);
}

struct Encoder {
  uint64_t operator()(const LType& l) const {
    check_dimm(l.dimm);
    check_size(l.vector_size);
    if (l.daddr > kMaxDaddr) throw EncodeError("daddr field overflow");
    return head(Opcode::kLoad, l.dimm) | l.vector_size |
           (l.daddr << kSizeBits);
  }
  uint64_t operator()(const CType& c) const {
    check_dimm(c.dimm);
    check_dst(c.dst_index);
    if (static_cast<uint8_t>(c.op) > static_cast<uint8_t>(AggOp::kMean)) {
      throw EncodeError("unknown aggregator op");
    }
    return head(Opcode::kCompute, c.dimm) | c.dst_index |
           (static_cast<uint64_t>(c.edge_w) << kDstBits) |
           (static_cast<uint64_t>(c.op) << (kDstBits + kWeightBits));
  }
  uint64_t operator()(const RType& r) const {
    check_dimm(r.dimm);
    check_dst(r.dst_index);
    check_size(r.vector_size);
    return head(Opcode::kRead, r.dimm) | r.vector_size |
           (static_cast<uint64_t>(r.dst_index) << kSizeBits);
  }
  uint64_t operator()(const BType&) const {
    return head(Opcode::kExt, 0) | kSubopBroadcast;
  }
};

void expect_clear(uint64_t payload, int used_bits) {
  if (payload >> used_bits) throw DecodeError("reserved payload bits set");
}

}  // namespace

uint64_t encode(const Instruction& instr) {
  return std::visit(Encoder{}, instr);
}

Instruction decode(uint64_t word) {
  auto op = static_cast<Opcode>(word >> kOpShift);
  auto dimm = static_cast<uint8_t>((word >> kDimmShift) & 0xf);
  uint64_t p = word & kPayloadMask;
  switch (op) {
    case Opcode::kLoad: {
      expect_clear(p, kSizeBits + kDaddrBits);
      LType l{dimm, p >> kSizeBits, static_cast<uint32_t>(p & mask(kSizeBits))};
      if (l.daddr > kMaxDaddr) throw DecodeError("daddr out of range");
      if (l.vector_size == 0 || l.vector_size > kMaxVectorSize ||
          l.vector_size % 2) {
        throw DecodeError("bad vector_size");
      }
      return l;
    }
    case Opcode::kCompute: {
      expect_clear(p, kDstBits + kWeightBits + kAggBits);
      CType c;
      c.dimm = dimm;
      c.dst_index = static_cast<uint16_t>(p & mask(kDstBits));
      c.edge_w = static_cast<uint16_t>((p >> kDstBits) & mask(kWeightBits));
      auto agg = (p >> (kDstBits + kWeightBits)) & mask(kAggBits);
      if (agg > static_cast<uint64_t>(AggOp::kMean)) {
        throw DecodeError("reserved aggregator op");
      }
      c.op = static_cast<AggOp>(agg);
      if (c.dst_index > kMaxDstIndex) throw DecodeError("dst_index out of range");
      return c;
    }
    case Opcode::kRead: {
      expect_clear(p, kSizeBits + kDstBits);
      RType r{dimm, static_cast<uint16_t>(p >> kSizeBits),
              static_cast<uint32_t>(p & mask(kSizeBits))};
      if (r.dst_index > kMaxDstIndex) throw DecodeError("dst_index out of range");
      if (r.vector_size == 0 || r.vector_size > kMaxVectorSize ||
          r.vector_size % 2) {
        throw DecodeError("bad vector_size");
      }
      return r;
    }
    case Opcode::kExt: {
      expect_clear(p, kSubopBits);
      if (p != kSubopBroadcast || dimm != 0) {
        throw DecodeError("reserved opcode");
      }
      return BType{};
    }
  }
  throw DecodeError("reserved opcode");
}

std::string to_string(const Instruction& instr) {
  std::ostringstream os;
  if (auto* l = std::get_if<LType>(&instr)) {
    os << "L dimm=" << int{l->dimm} << " daddr=0x" << std::hex << l->daddr
       << std::dec << " size=" << l->vector_size;
  } else if (auto* c = std::get_if<CType>(&instr)) {
    os << "C dimm=" << int{c->dimm} << " op=" << int(c->op)
       << " w=" << bf16_to_float(c->edge_w) << " dst=" << c->dst_index;
  } else if (auto* r = std::get_if<RType>(&instr)) {
    os << "R dimm=" << int{r->dimm} << " dst=" << r->dst_index
       << " size=" << r->vector_size;
  } else {
    os << "B";
  }
  return os.str();
}

uint64_t l_type_latency(uint32_t vector_size, bool row_hit,
                        const TimingParams& t) {
  if (vector_size == 0) throw ParamError("vector_size must be positive");
  uint64_t data = ceil_div(vector_size, t.burst_bytes) * t.tBL;
  if (row_hit) return t.tCL + data;
  return static_cast<uint64_t>(t.tRC) + t.tRCD + t.tCL + data;
}

FixedLatencies fixed_latencies(uint32_t d_elements, uint32_t vector_bytes,
                               const NmeConfig& nme, const TimingParams& t) {
  FixedLatencies f;
  f.nme_cd_eu_cycles =
      ceil_div(d_elements, static_cast<uint64_t>(nme.macs_per_pe) * nme.num_pes);
  f.nme_cd = ceil_div(f.nme_cd_eu_cycles * t.clock_mhz, nme.clock_mhz);
  f.nme_rd = ceil_div(vector_bytes, t.burst_bytes) * t.tBL;
  return f;
}

void write_trace(std::ostream& out, const std::vector<uint64_t>& words) {
  binio::put_magic(out, "GNIT");
  binio::put<uint64_t>(out, words.size());
  for (uint64_t w : words) binio::put<uint64_t>(out, w);
}

std::vector<uint64_t> read_trace(std::istream& in) {
  binio::expect_magic(in, "GNIT");
  uint64_t n = binio::get<uint64_t>(in);
  std::vector<uint64_t> words;
  words.reserve(n);
  for (uint64_t i = 0; i < n; ++i) words.push_back(binio::get<uint64_t>(in));
  return words;
}

}  // namespace gnnear::isa
