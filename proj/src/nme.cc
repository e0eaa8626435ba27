#include "gnnear/nme.h"

#include <algorithm>

#include "gnnear/common.h"

namespace gnnear {

void validate(const NmeConfig& cfg) {
  if (cfg.num_pes == 0 || cfg.macs_per_pe == 0 || cfg.clock_mhz == 0) {
    throw ConfigError("NME needs PEs, MACs and a clock");
  }
  if (cfg.buffer_bytes == 0 || cfg.word_bytes == 0 || cfg.vector_budget == 0) {
    throw ConfigError("NME buffer parameters must be positive");
  }
}

NmeDatapath::NmeDatapath(const NmeConfig& cfg, uint32_t dim,
                         uint32_t vector_bytes, uint32_t num_slots,
                         Precision precision)
    : cfg_(cfg),
      dim_(dim),
      vector_bytes_(vector_bytes),
      precision_(precision),
      partial_(std::size_t{num_slots} * dim, 0.0f),
      live_(num_slots, 0) {
  validate(cfg_);
  if (dim == 0) throw ParamError("vector width must be positive");
}

uint64_t NmeDatapath::resident_bytes() const {
  return (sources_.size() + live_count_) * uint64_t{vector_bytes_};
}

void NmeDatapath::note_occupancy() {
  uint64_t r = resident_bytes();
  high_water_ = std::max(high_water_, r);
  if (r > cfg_.buffer_bytes) {
    throw StateError("NME data buffer overflow");
  }
}

bool NmeDatapath::exec_l(uint64_t tag, std::span<const float> data) {
  if (data.size() != dim_) throw ParamError("loaded vector width mismatch");
  if (resident(tag)) return false;
  sources_.emplace(tag, data);
  note_occupancy();
  return true;
}

void NmeDatapath::exec_c(const isa::CType& c, uint64_t tag, float weight) {
  auto it = sources_.find(tag);
  if (it == sources_.end()) {
    throw ProtocolError("C-type source vector " + std::to_string(tag) +
                        " is not resident");
  }
  if (c.dst_index >= live_.size()) {
    throw ProtocolError("dst_index beyond the shard width");
  }
  const float w =
      precision_ == Precision::kBf16 ? bf16_to_float(c.edge_w) : weight;
  if (!live_[c.dst_index]) {
    live_[c.dst_index] = 1;
    ++live_count_;
    note_occupancy();
  }
  float* y = partial_.data() + std::size_t{c.dst_index} * dim_;
  const float* x = it->second.data();
  for (uint32_t k = 0; k < dim_; ++k) y[k] += w * x[k];
  mac_ops_ += dim_;
}

std::vector<float> NmeDatapath::exec_r(const isa::RType& r) {
  if (r.dst_index >= live_.size() || !live_[r.dst_index]) {
    throw ProtocolError("R-type reads a slot with no partial result");
  }
  float* y = partial_.data() + std::size_t{r.dst_index} * dim_;
  std::vector<float> out(y, y + dim_);
  std::fill(y, y + dim_, 0.0f);
  live_[r.dst_index] = 0;
  --live_count_;
  return out;
}

void NmeDatapath::evict(uint64_t tag) { sources_.erase(tag); }

void NmeDatapath::evict_all() { sources_.clear(); }

uint64_t NmeDatapath::c_cycles() const {
  return ceil_div(dim_, uint64_t{cfg_.macs_per_pe} * cfg_.num_pes);
}

uint64_t shard_pipeline_makespan(std::span<const uint64_t> load,
                                 std::span<const uint64_t> compute,
                                 bool overlap) {
  if (load.size() != compute.size()) {
    throw ParamError("load and compute lists differ in length");
  }
  uint64_t load_done = 0;
  uint64_t compute_done = 0;
  for (std::size_t k = 0; k < load.size(); ++k) {
    uint64_t start = overlap ? load_done : std::max(load_done, compute_done);
    load_done = start + load[k];
    compute_done = std::max(compute_done, load_done) + compute[k];
  }
  return std::max(load_done, compute_done);
}

uint64_t shard_buffer_bytes(uint32_t R, uint32_t C, uint32_t vector_bytes,
                            bool overlap) {
  return (uint64_t{R} * (overlap ? 2 : 1) + C) * vector_bytes;
}

}  // namespace gnnear
