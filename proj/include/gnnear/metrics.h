#ifndef GNNEAR_METRICS_H_
#define GNNEAR_METRICS_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gnnear/hw_config.h"

namespace gnnear {

// Traffic of one layer in one direction.
struct LayerCounters {
  uint64_t l_types = 0;
  uint64_t c_types = 0;
  uint64_t r_types = 0;
  // One source vector per C-type: the per-edge access stream.
  uint64_t reduce_source_bytes = 0;
  // Reduce data crossing the channel: R-type partials with near-memory
  // processing, loaded source vectors without it.
  uint64_t reduce_off_chip_bytes = 0;
  // Vertex-stream of the layer's combination: outputs written when
  // aggregation runs first, inputs read when combination runs first.
  uint64_t update_stream_bytes = 0;
  bool operator==(const LayerCounters&) const = default;
};

struct Counters {
  uint64_t off_chip_read_bytes = 0;
  uint64_t off_chip_write_bytes = 0;
  uint64_t local_read_bytes = 0;
  uint64_t local_write_bytes = 0;
  std::vector<uint64_t> channel_read_bytes;
  std::vector<uint64_t> channel_write_bytes;
  std::vector<uint64_t> dimm_local_read_bytes;
  std::vector<uint64_t> dimm_local_write_bytes;
  uint64_t dup_write_bytes = 0;  // off-chip writes to duplicated vertices
  uint64_t b_types = 0;
  uint64_t eu_mac_ops = 0;
  uint64_t gemm_flops = 0;
  uint64_t vpu_ops = 0;
  uint64_t makespan_cycles = 0;  // memory clock
  uint64_t nme_eu_ticks = 0;     // summed over NMEs
  uint64_t nme_buffer_ticks = 0;
  uint64_t gemm_busy_cycles = 0;  // CAE clock
  uint64_t vpu_busy_cycles = 0;
  uint64_t fifo_stall_cycles = 0;
  uint64_t queue_stall_cycles = 0;
  uint64_t buffer_high_water = 0;
  uint64_t dram_commands = 0;
  uint64_t row_hits = 0;
  uint64_t row_misses = 0;
  // Index 2*layer + direction (0 forward, 1 backward).
  std::vector<LayerCounters> layers;

  LayerCounters& layer(uint32_t l, bool backward);
  const LayerCounters& layer(uint32_t l, bool backward) const;
  uint64_t reduce_off_chip_bytes() const;
  bool operator==(const Counters&) const = default;
};

struct EnergyModel {
  double off_chip_pj_per_bit = 22.0;
  double local_read_pj_per_bit = 14.0;
  double nme_eu_mw = 178.1;
  double nme_buffer_mw = 80.0;
  double gemm_mw = 6291.4;
  double vpu_mw = 296.6;
  double scratchpad_mw = 5519.2;
  void validate() const;  // ConfigError
};

enum class PowerMode : uint8_t { kActive, kAlwaysOn };

struct EnergyBreakdown {
  double off_chip_j = 0;
  double local_read_j = 0;
  double nme_eu_j = 0;
  double nme_buffer_j = 0;
  double gemm_j = 0;
  double vpu_j = 0;
  double scratchpad_j = 0;
  double movement_j() const { return off_chip_j + local_read_j; }
  double total_j() const {
    return movement_j() + nme_eu_j + nme_buffer_j + gemm_j + vpu_j +
           scratchpad_j;
  }
};

double makespan_seconds(const Counters& c, const TimingParams& t = {});

EnergyBreakdown energy_total(const Counters& c, const EnergyModel& m,
                             PowerMode mode, uint32_t num_nmes,
                             const TimingParams& t = {},
                             const CaeConfig& cae = {});

struct RooflinePoint {
  std::string name;
  double intensity = 0;   // Ops/Byte
  double attainable = 0;  // Ops/s
  double peak = 0;
  double bandwidth = 0;   // Bytes/s
  double ridge() const { return peak / bandwidth; }
};

RooflinePoint roofline_point(std::string name, double intensity, double peak,
                             double bandwidth);
// Aggregated near-memory bandwidth: every rank streams concurrently.
double nmp_bandwidth(const SystemShape& s, const TimingParams& t = {});
double channel_bandwidth(const SystemShape& s, const TimingParams& t = {});

struct SimReport {
  std::string workload;  // fingerprint of graph, model and seeds
  std::string config;
  uint32_t num_dimms = 0;
  Counters counters;
  double loss = 0;
  EnergyBreakdown energy;  // active mode
  double energy_always_on_j = 0;
  std::vector<RooflinePoint> roofline;
  std::string verdict = "SKIPPED";  // PASS, FAIL or SKIPPED
  double max_deviation = 0;
  std::string divergence;
};

// Fills energy fields from the counters.
void finalize_energy(SimReport& r, const EnergyModel& m = {});
// 100 * (1 - nmp/base) over Reduce off-chip reads. ComparisonError when the
// two reports describe different workloads.
double reduction_saving(const SimReport& base, const SimReport& nmp);

void write_report(std::ostream& out, const SimReport& r);
SimReport parse_report(std::istream& in);  // ParseError

struct SweepRow {
  std::string parameter;
  uint64_t cycles = 0;
  uint64_t off_chip_bytes = 0;
  double energy_j = 0;
};
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace gnnear

#endif  // GNNEAR_METRICS_H_
