#ifndef GNNEAR_SIMULATOR_H_
#define GNNEAR_SIMULATOR_H_

#include <cstdint>
#include <string>
#include <vector>

#include "gnnear/graph.h"
#include "gnnear/hw_config.h"
#include "gnnear/metrics.h"
#include "gnnear/model.h"
#include "gnnear/partition.h"
#include "gnnear/timing.h"

namespace gnnear {

struct Toggles {
  bool nmp = true;
  bool narrow_shard = true;
  bool hgp = true;
  bool broadcast = true;
  bool window = true;
  bool interleave = true;
  bool overlap = true;
  bool ieo = true;

  static Toggles all_off();
  void validate() const;  // ConfigError
  std::string to_string() const;
};

struct SimOptions {
  Toggles toggles;
  ShardConfig shard;
  uint32_t window_size = 4;  // used when the window toggle is on
  SystemShape shape;
  double lambda = 0.35;  // used when hgp is on
  TimingParams timing;
  NmeConfig nme;
  CaeConfig cae;
  EnergyModel energy;
  bool timed = true;
  // Off: only counters and traces, no arithmetic.
  bool functional = true;
  bool record_commands = false;
  bool record_trace = true;
  bool audit = false;
  // Counts traffic as if every element took 4 bytes.
  bool count_as_fp32 = false;
  // Doubles one layer-0 forward neighbor weight (fault injection).
  int64_t fault_edge = -1;

  uint32_t effective_window() const {
    return toggles.window ? window_size : 1;
  }
  PartitionConfig partition_config() const;
  void validate() const;  // ConfigError
};

struct SimInputs {
  const CsrGraph* graph = nullptr;
  ModelConfig model;
  TrainerState state;  // initial weights
  Matrix features;
  std::vector<uint32_t> labels;
};

struct PhaseLog {
  bool has_aggregate = false;
  uint32_t layer = 0;
  Direction dir = Direction::kForward;
  std::vector<uint32_t> commits;
};

struct SimResult {
  Counters counters;
  double loss = 0;
  std::vector<Matrix> h;       // 0..L
  std::vector<Matrix> grad_h;  // 1..L-1 filled
  std::vector<LayerParams> grads;
  TrainerState updated;  // after the SGD step
  std::vector<std::vector<uint64_t>> trace;  // per channel
  std::vector<CommandRecord> commands;
  std::vector<PhaseLog> phases;
  // Per aggregate phase, partial-result bytes read out per destination.
  std::vector<std::vector<uint64_t>> readout_bytes;
  // Per aggregate phase, the vertex width in counted bytes.
  std::vector<uint32_t> readout_vector_bytes;
  Placement placement;
};

// One training epoch on the modeled system.
SimResult simulate_epoch(const SimInputs& in, const SimOptions& opt);

// Instruction trace of the strictly sequential workflow: every interval is
// issued, merged and committed before the next one starts.
std::vector<std::vector<uint64_t>> base_workflow_trace(const SimInputs& in,
                                                       const SimOptions& opt);

// Hash of graph, model, initial state, features and labels.
std::string workload_fingerprint(const SimInputs& in);

struct Validation {
  bool pass = false;
  double max_deviation = 0;
  std::string divergence;  // first tensor over tolerance, with its location
};

double tolerance_for(Precision p);
Validation validate_against_reference(const SimInputs& in,
                                      const SimResult& r);

SimReport make_report(const SimInputs& in, const SimOptions& opt,
                      const SimResult& r, const Validation* v);

std::string describe(const SimOptions& opt);

}  // namespace gnnear

#endif  // GNNEAR_SIMULATOR_H_
