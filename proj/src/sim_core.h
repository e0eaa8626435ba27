#ifndef GNNEAR_SRC_SIM_CORE_H_
#define GNNEAR_SRC_SIM_CORE_H_

#include <map>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "gnnear/cae.h"
#include "gnnear/simulator.h"

namespace gnnear {

// One Reduce with the vertex operations that follow it, or the vertex
// operations that precede the first Reduce.
struct PhaseDef {
  bool has_aggregate = false;
  EpochOp agg{OpKind::kAggregate, 0, Direction::kForward, 0};
  std::vector<EpochOp> tail;
};

std::vector<PhaseDef> split_phases(const std::vector<EpochOp>& ops);

// Host-side access to one vertex vector.
struct HostAccess {
  uint32_t vertex = 0;
  DataType type = DataType::kH;
  uint32_t layer = 0;
  bool write = false;
  bool broadcast = false;
  std::vector<uint32_t> dimms;  // global indices written or read
};

// Vertex operations of one interval after its commit.
struct TailWork {
  uint32_t interval = 0;
  std::vector<HostAccess> accesses;  // reads first, then writes
  uint64_t gemm_cycles = 0;
  uint64_t vpu_cycles = 0;
  std::vector<uint32_t> broadcast_channels;
};

// Functional state, traffic accounting and instruction generation shared by
// the timed and the sequential drivers.
class SimCore {
 public:
  SimCore(const SimInputs& in, const SimOptions& opt);

  const SimOptions& options() const { return opt_; }
  const Placement& placement() const { return placement_; }
  const AddressMap& address_map() const { return *amap_; }
  Counters& counters() { return counters_; }
  Precision precision() const { return prec_; }
  std::size_t num_phases() const { return phases_.size(); }
  uint32_t num_intervals() const;
  VertexRange interval_range(uint32_t i) const;

  // Returns CAE VPU cycles spent on attention weights before the phase.
  uint64_t begin_phase(std::size_t k);
  bool phase_has_aggregate() const { return cur_.def.has_aggregate; }
  PhaseLog& phase_log() { return phase_logs_.back(); }
  uint32_t phase_dim() const { return cur_.src.dim; }
  uint32_t phase_vector_bytes() const { return cur_.vb; }
  DataType phase_type() const { return cur_.src.type; }
  uint32_t phase_layer() const { return cur_.src.layer; }

  const std::vector<DimmProgram>& programs(uint32_t interval);
  void release_programs(uint32_t interval);
  std::vector<uint64_t> program_words(const DimmProgram& prog) const;
  void account_program(const DimmProgram& prog);
  void log_words(uint32_t channel, const std::vector<uint64_t>& words);
  std::span<const float> source_row(uint32_t v) const;

  void commit_rows(uint32_t interval, const std::vector<float>& rows);
  TailWork run_tail(uint32_t interval);

  void finish(SimResult& out);

 private:
  struct Source {
    DataType type = DataType::kH;
    uint32_t layer = 0;
    uint32_t dim = 0;
    const Matrix* src = nullptr;
    Matrix* dst = nullptr;
  };
  struct PhaseState {
    std::size_t index = 0;
    PhaseDef def;
    Source src;
    const CsrGraph* graph = nullptr;
    const EdgeWeights* weights = nullptr;
    std::unique_ptr<ShardPlanner> planner;
    uint32_t vb = 0;
    uint32_t cvb = 0;
    LayerCounters* lc = nullptr;
  };
  struct GradAcc {
    std::vector<double> w, w2, b1, b2;
  };

  static const CsrGraph& require_graph(const SimInputs& in);
  bool ieo(uint32_t l) const;
  Source source_of(const EpochOp& agg);
  bool is_source(DataType t, uint32_t layer) const;
  void add_read(TailWork& w, VertexRange r, DataType type, uint32_t layer);
  void add_write(TailWork& w, VertexRange r, DataType type, uint32_t layer);
  void gemm(TailWork& w, uint64_t M, uint64_t K, uint64_t N);
  void vpu(TailWork& w, uint64_t elements);
  void activate(uint32_t l, VertexRange r);
  void loss_rows(VertexRange r);
  void head_backward(uint32_t l, VertexRange r);

  const SimInputs& in_;
  SimOptions opt_;
  const CsrGraph& g_;
  ModelConfig cfg_;
  CsrGraph gt_storage_;
  const CsrGraph* gt_ = nullptr;
  uint32_t L_ = 0;
  Precision prec_ = Precision::kFp32;
  uint32_t eb_ = 4;
  uint32_t ceb_ = 4;
  std::vector<EpochOp> ops_;
  std::vector<PhaseDef> phases_;
  Placement placement_;
  std::unique_ptr<AddressMap> amap_;
  std::vector<std::pair<DataType, uint32_t>> sources_;

  std::vector<Matrix> h_, a_, z_, t_, p_, dp_, d_, gh_, G_;
  std::vector<EdgeWeights> ew_fwd_, ew_bwd_;
  std::vector<GradAcc> acc_;
  double loss_acc_ = 0;

  PhaseState cur_;
  std::map<uint32_t, std::vector<DimmProgram>> plan_cache_;
  Counters counters_;
  std::vector<std::vector<uint64_t>> trace_;
  std::vector<PhaseLog> phase_logs_;
  std::vector<std::vector<uint64_t>> readout_bytes_;
  std::vector<uint32_t> readout_vb_;
};

// Drivers.
void run_sequential(SimCore& core, SimResult& out);
void run_timed(SimCore& core, SimResult& out);

}  // namespace gnnear

#endif  // GNNEAR_SRC_SIM_CORE_H_
