#ifndef GNNEAR_CAE_H_
#define GNNEAR_CAE_H_

#include <cstdint>
#include <span>
#include <vector>

#include "gnnear/graph.h"
#include "gnnear/hw_config.h"
#include "gnnear/isa.h"
#include "gnnear/model.h"
#include "gnnear/partition.h"

namespace gnnear {

void validate(const CaeConfig& cfg);  // ConfigError

// ---- Cost models (CAE clock cycles) -----------------------------------------

enum class CaeOp : uint8_t { kGemm, kOuterProduct, kActivation, kMerge };

// Weight-stationary tiles: ceil(M/rows) * ceil(N/cols) * (K + rows).
uint64_t gemm_cycles(uint64_t M, uint64_t K, uint64_t N, const CaeConfig& c);
uint64_t vpu_cycles(uint64_t elements, const CaeConfig& c);
// kGemm: M x K times K x N. kOuterProduct: M rank-1 updates of K x N.
// kActivation: M x N elements. kMerge: one vector of N elements.
uint64_t update_cost(CaeOp op, uint64_t M, uint64_t K, uint64_t N,
                     const CaeConfig& c);
// ConfigError when a layer's weights do not fit the scratchpad.
void check_scratchpad(const ModelConfig& m, const CaeConfig& c);

// acc += partial, elementwise.
void merge_partials(std::span<float> acc, std::span<const float> partial);

// ---- Narrow-shard program generation ---------------------------------------

struct ShardOp {
  enum Kind : uint8_t { kLoad, kCompute, kRead };
  Kind kind;
  uint32_t vertex;    // source for L/C, destination for R
  uint16_t slot = 0;  // destination slot for C/R
  float weight = 0;   // C only
  isa::AggOp op = isa::AggOp::kWeightedSum;
  uint32_t shard = 0;
};

// Work of one DIMM for one interval, in issue order.
struct DimmProgram {
  uint32_t dimm = 0;  // global index
  uint32_t interval = 0;
  std::vector<ShardOp> ops;
  uint32_t loads = 0;
  uint32_t computes = 0;
  uint32_t reads = 0;
  bool empty() const { return ops.empty(); }
};

struct ShardCounts {
  uint64_t loads = 0;
  uint64_t computes = 0;
  uint64_t reads = 0;
  uint64_t shards = 0;
  ShardCounts& operator+=(const ShardCounts& o);
};

// Groups destinations into intervals of C and, per DIMM, the sources it
// works on into rows. A non-empty R x C shard loads all of its R rows and
// issues one C-type per edge; empty shards are skipped. With narrow shards
// disabled every edge loads its own source.
class ShardPlanner {
 public:
  ShardPlanner(const CsrGraph& g, const EdgeWeights* weights,
               const Placement& p, const ShardConfig& shard, bool narrow);

  uint32_t num_intervals() const { return num_intervals_; }
  VertexRange interval(uint32_t i) const;
  void set_ops(isa::AggOp self_op, isa::AggOp nbr_op) {
    self_op_ = self_op;
    nbr_op_ = nbr_op;
  }

  // One program per DIMM in global order.
  std::vector<DimmProgram> plan(uint32_t interval) const;
  ShardCounts count(uint32_t interval) const;
  ShardCounts count_all() const;

 private:
  struct Item {
    uint32_t dimm;
    uint32_t pos;
    uint32_t src;
    uint16_t slot;
    bool self;
    float weight;
  };
  void collect(uint32_t interval, std::vector<Item>& items) const;
  uint32_t rows(uint32_t dimm, uint32_t interval) const;
  uint32_t row_vertex(uint32_t dimm, uint32_t pos) const;
  template <typename Emit>
  void walk(uint32_t interval, Emit&& emit) const;

  const CsrGraph& g_;
  const EdgeWeights* w_;
  const Placement& p_;
  ShardConfig shard_;
  bool narrow_;
  uint32_t num_intervals_;
  isa::AggOp self_op_ = isa::AggOp::kWeightedSum;
  isa::AggOp nbr_op_ = isa::AggOp::kWeightedSum;
  std::vector<std::vector<uint32_t>> own_;  // per DIMM, ascending
  std::vector<std::vector<uint32_t>> dup_;  // per channel, ascending
  std::vector<uint32_t> index_;             // position in own_ or dup_
};

// Narrow-shard load counts over every interval of a graph.
ShardCounts count_shard_loads(const CsrGraph& g, const Placement& p,
                              const ShardConfig& shard);

// ---- Window-based interval scheduling ---------------------------------------

// Intervals are admitted per DIMM in order, at most W beyond the oldest
// uncommitted one. Partial results merge into a W-slot window buffer and
// intervals commit strictly in order once every DIMM's partials arrived.
class WindowScheduler {
 public:
  WindowScheduler(uint32_t window, uint32_t num_dimms, uint32_t num_intervals,
                  uint32_t width, uint32_t dim);

  uint32_t window() const { return window_; }
  uint32_t committed() const { return committed_; }
  uint32_t num_intervals() const { return num_intervals_; }
  bool done() const { return committed_ == num_intervals_; }

  // Next interval a DIMM would take, or num_intervals when exhausted.
  uint32_t next_interval(uint32_t dimm) const { return next_[dimm]; }
  bool may_admit(uint32_t dimm) const;
  // Takes the DIMM's next interval, expecting `partials` readouts from it.
  uint32_t admit(uint32_t dimm, uint32_t partials);
  void finish_issue(uint32_t dimm) { issuing_[dimm] = 0; }
  bool issuing(uint32_t dimm) const { return issuing_[dimm] != 0; }

  // ProtocolError for committed or not-yet-admitted intervals.
  void merge(uint32_t interval, uint32_t slot, std::span<const float> partial);
  // Counts a merge without data (timing-only runs).
  void merge_count(uint32_t interval);
  bool ready_to_commit() const;
  // Commits the oldest interval and returns its merged rows (width x dim).
  std::vector<float> commit();
  const std::vector<uint32_t>& commit_log() const { return commit_log_; }

 private:
  struct Slot {
    uint32_t interval = UINT32_MAX;
    uint32_t admitted = 0;
    uint64_t expected = 0;
    uint64_t merged = 0;
    std::vector<float> rows;
  };
  Slot& slot_for(uint32_t interval);
  const Slot& slot_for(uint32_t interval) const;

  uint32_t window_;
  uint32_t num_dimms_;
  uint32_t num_intervals_;
  uint32_t width_;
  uint32_t dim_;
  uint32_t committed_ = 0;
  std::vector<uint32_t> next_;
  std::vector<uint8_t> issuing_;
  std::vector<Slot> slots_;
  std::vector<uint32_t> commit_log_;
};

// ---- Interchanged execution order -------------------------------------------

struct IeoTraffic {
  double aggregate_first;  // Ẽ*d_in + V*d_out
  double combine_first;    // Ẽ*d_out + V*d_in
  double ratio() const { return aggregate_first / combine_first; }
};

// Element counts for one layer; Ẽ = sum of closed-neighborhood sizes.
IeoTraffic ieo_traffic(uint64_t closed_edges, uint64_t vertices,
                       uint32_t d_in, uint32_t d_out);

}  // namespace gnnear

#endif  // GNNEAR_CAE_H_
