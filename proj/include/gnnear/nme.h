#ifndef GNNEAR_NME_H_
#define GNNEAR_NME_H_

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "gnnear/bf16.h"
#include "gnnear/hw_config.h"
#include "gnnear/isa.h"

namespace gnnear {

void validate(const NmeConfig& cfg);  // ConfigError

// Data buffer and execution unit of one NME, functional view. Source
// vectors are referenced rather than copied; partial sums live in C slots.
class NmeDatapath {
 public:
  NmeDatapath(const NmeConfig& cfg, uint32_t dim, uint32_t vector_bytes,
              uint32_t num_slots, Precision precision);

  // Makes `data` resident under `tag` (a source vertex, optionally
  // qualified by shard). Returns false when it was already resident, so no
  // DRAM access is needed.
  bool exec_l(uint64_t tag, std::span<const float> data);
  // Y'[slot] += w * X(tag). In BF16 mode the weight is taken from the
  // instruction word; otherwise `weight` supplies the full-precision value.
  void exec_c(const isa::CType& c, uint64_t tag, float weight);
  // Reads out and frees a slot. The partial keeps FP32 precision; the
  // merged row is rounded when it is stored.
  std::vector<float> exec_r(const isa::RType& r);
  void evict(uint64_t tag);
  void evict_all();

  bool resident(uint64_t tag) const { return sources_.count(tag) > 0; }
  bool slot_live(uint32_t slot) const { return live_[slot] != 0; }
  uint64_t resident_bytes() const;
  uint64_t high_water_bytes() const { return high_water_; }
  uint64_t mac_ops() const { return mac_ops_; }
  // EU cycles (NME clock) for one C-type.
  uint64_t c_cycles() const;

 private:
  void note_occupancy();

  NmeConfig cfg_;
  uint32_t dim_;
  uint32_t vector_bytes_;
  Precision precision_;
  std::unordered_map<uint64_t, std::span<const float>> sources_;
  std::vector<float> partial_;
  std::vector<uint8_t> live_;
  uint32_t live_count_ = 0;
  uint64_t high_water_ = 0;
  uint64_t mac_ops_ = 0;
};

// Completion time of a shard sequence on one NME. With overlap the load of
// shard k+1 starts once the load of shard k has finished; without it the
// load waits for shard k's computation as well.
uint64_t shard_pipeline_makespan(std::span<const uint64_t> load,
                                 std::span<const uint64_t> compute,
                                 bool overlap);

// Buffer bytes needed by a shard configuration: resident source rows of
// one (or, with overlap, two) shards plus the C partial-sum slots.
uint64_t shard_buffer_bytes(uint32_t R, uint32_t C, uint32_t vector_bytes,
                            bool overlap);

}  // namespace gnnear

#endif  // GNNEAR_NME_H_
