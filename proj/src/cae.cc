#include "gnnear/cae.h"

#include <algorithm>

#include "gnnear/common.h"

namespace gnnear {

void validate(const CaeConfig& cfg) {
  if (cfg.gemm_rows == 0 || cfg.gemm_cols == 0 || cfg.clock_mhz == 0) {
    throw ConfigError("GEMM array needs rows, columns and a clock");
  }
  if (cfg.vpu_cores == 0 || cfg.vpu_simd == 0) {
    throw ConfigError("VPU needs cores and SIMD lanes");
  }
  if (cfg.fifo_depth == 0) throw ConfigError("result FIFO depth must be >= 1");
}

uint64_t gemm_cycles(uint64_t M, uint64_t K, uint64_t N, const CaeConfig& c) {
  if (M == 0 || K == 0 || N == 0) {
    throw ParamError("GEMM dimensions must be positive");
  }
  return ceil_div(M, c.gemm_rows) * ceil_div(N, c.gemm_cols) *
         (K + c.gemm_rows);
}

uint64_t vpu_cycles(uint64_t elements, const CaeConfig& c) {
  return ceil_div(elements, c.vpu_lanes());
}

uint64_t update_cost(CaeOp op, uint64_t M, uint64_t K, uint64_t N,
                     const CaeConfig& c) {
  switch (op) {
    case CaeOp::kGemm:
      return gemm_cycles(M, K, N, c);
    case CaeOp::kOuterProduct:
      if (M == 0 || K == 0 || N == 0) {
        throw ParamError("outer-product dimensions must be positive");
      }
      return vpu_cycles(M * K * N, c);
    case CaeOp::kActivation:
      return vpu_cycles(M * N, c);
    case CaeOp::kMerge:
      return vpu_cycles(N, c);
  }
  return 0;
}

void check_scratchpad(const ModelConfig& m, const CaeConfig& c) {
  for (uint32_t l = 0; l < m.num_layers(); ++l) {
    const auto& d = m.dims[l];
    uint64_t elems = uint64_t{d.d_in} * d.d_out;
    if (m.variant == Variant::kGin) elems += uint64_t{d.d_out} * d.d_out;
    if (elems * m.element_bytes() > c.scratchpad_bytes) {
      throw ConfigError("layer " + std::to_string(l) +
                        " weights exceed the CAE scratchpad");
    }
  }
}

void merge_partials(std::span<float> acc, std::span<const float> partial) {
  if (acc.size() != partial.size()) {
    throw ParamError("partial result width mismatch");
  }
  for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += partial[k];
}

// ---- ShardPlanner -----------------------------------------------------------

ShardCounts& ShardCounts::operator+=(const ShardCounts& o) {
  loads += o.loads;
  computes += o.computes;
  reads += o.reads;
  shards += o.shards;
  return *this;
}

ShardPlanner::ShardPlanner(const CsrGraph& g, const EdgeWeights* weights,
                           const Placement& p, const ShardConfig& shard,
                           bool narrow)
    : g_(g), w_(weights), p_(p), shard_(shard), narrow_(narrow) {
  shard_.validate();
  if (p.num_vertices() != g.num_vertices) {
    throw ParamError("placement does not cover every vertex");
  }
  num_intervals_ = static_cast<uint32_t>(ceil_div(g.num_vertices, shard_.C));
  own_.assign(p.num_dimms(), {});
  dup_ = p.high_degree_set;
  index_.assign(g.num_vertices, 0);
  for (uint32_t v = 0; v < g.num_vertices; ++v) {
    if (p.duplicated[v]) continue;
    auto& list = own_[p.home_global(v)];
    index_[v] = static_cast<uint32_t>(list.size());
    list.push_back(v);
  }
  for (auto& list : dup_) {
    for (uint32_t i = 0; i < list.size(); ++i) index_[list[i]] = i;
  }
}

VertexRange ShardPlanner::interval(uint32_t i) const {
  uint32_t b = i * shard_.C;
  return {b, std::min(g_.num_vertices, b + shard_.C)};
}

uint32_t ShardPlanner::rows(uint32_t dimm, uint32_t interval) const {
  uint32_t ch = dimm / p_.dimms_per_channel;
  uint32_t n = static_cast<uint32_t>(own_[dimm].size());
  if (p_.global_dimm(ch, p_.interval_owner(interval)) == dimm) {
    n += static_cast<uint32_t>(dup_[ch].size());
  }
  return n;
}

uint32_t ShardPlanner::row_vertex(uint32_t dimm, uint32_t pos) const {
  const auto& own = own_[dimm];
  if (pos < own.size()) return own[pos];
  return dup_[dimm / p_.dimms_per_channel][pos - own.size()];
}

void ShardPlanner::collect(uint32_t i, std::vector<Item>& items) const {
  items.clear();
  VertexRange r = interval(i);
  auto add = [&](uint32_t u, uint32_t v, bool self, float w) {
    uint32_t dimm = p_.worker_dimm(u, i);
    uint32_t pos = p_.duplicated[u]
                       ? static_cast<uint32_t>(own_[dimm].size()) + index_[u]
                       : index_[u];
    items.push_back({dimm, pos, u, static_cast<uint16_t>(v - r.begin), self, w});
  };
  for (uint32_t v = r.begin; v < r.end; ++v) {
    add(v, v, true, w_ ? static_cast<float>(w_->self_w[v]) : 0.0f);
    for (uint64_t e = g_.row_ptr[v]; e < g_.row_ptr[v + 1]; ++e) {
      add(g_.col_idx[e], v, false,
          w_ ? static_cast<float>(w_->nbr_w[e]) : 0.0f);
    }
  }
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    if (a.dimm != b.dimm) return a.dimm < b.dimm;
    if (a.pos != b.pos) return a.pos < b.pos;
    return a.slot < b.slot;
  });
}

// Calls emit(dimm, op) in issue order, then emit(dimm, R) per slot.
template <typename Emit>
void ShardPlanner::walk(uint32_t i, Emit&& emit) const {
  thread_local std::vector<Item> items;
  thread_local std::vector<uint8_t> slot_used;
  collect(i, items);
  slot_used.assign(shard_.C, 0);
  const uint32_t R = shard_.R;
  std::size_t a = 0;
  while (a < items.size()) {
    const uint32_t dimm = items[a].dimm;
    std::size_t end = a;
    while (end < items.size() && items[end].dimm == dimm) ++end;
    uint32_t shard = 0;
    auto compute = [&](const Item& it) {
      emit(dimm, ShardOp{ShardOp::kCompute, it.src, it.slot, it.weight,
                         it.self ? self_op_ : nbr_op_, shard});
      slot_used[it.slot] = 1;
    };
    if (!narrow_) {
      for (std::size_t k = a; k < end; ++k, ++shard) {
        emit(dimm, ShardOp{ShardOp::kLoad, items[k].src, 0, 0,
                           isa::AggOp::kWeightedSum, shard});
        compute(items[k]);
      }
    } else {
      const uint32_t total_rows = rows(dimm, i);
      std::size_t k = a;
      while (k < end) {
        const uint32_t block = items[k].pos / R;
        std::size_t block_end = k;
        while (block_end < end && items[block_end].pos / R == block) {
          ++block_end;
        }
        const uint32_t first = block * R;
        const uint32_t last = std::min(first + R, total_rows);
        for (uint32_t pos = first; pos < last; ++pos) {
          emit(dimm, ShardOp{ShardOp::kLoad, row_vertex(dimm, pos), 0, 0,
                             isa::AggOp::kWeightedSum, shard});
        }
        for (; k < block_end; ++k) compute(items[k]);
        ++shard;
      }
    }
    for (uint32_t s = 0; s < shard_.C; ++s) {
      if (!slot_used[s]) continue;
      slot_used[s] = 0;
      emit(dimm, ShardOp{ShardOp::kRead, interval(i).begin + s,
                         static_cast<uint16_t>(s), 0,
                         isa::AggOp::kWeightedSum, shard});
    }
    a = end;
  }
}

std::vector<DimmProgram> ShardPlanner::plan(uint32_t i) const {
  if (i >= num_intervals_) throw ParamError("interval out of range");
  std::vector<DimmProgram> out(p_.num_dimms());
  for (uint32_t d = 0; d < out.size(); ++d) {
    out[d].dimm = d;
    out[d].interval = i;
  }
  walk(i, [&](uint32_t dimm, const ShardOp& op) {
    DimmProgram& prog = out[dimm];
    prog.ops.push_back(op);
    switch (op.kind) {
      case ShardOp::kLoad: ++prog.loads; break;
      case ShardOp::kCompute: ++prog.computes; break;
      case ShardOp::kRead: ++prog.reads; break;
    }
  });
  return out;
}

ShardCounts ShardPlanner::count(uint32_t i) const {
  ShardCounts c;
  int64_t last_dimm = -1;
  uint32_t last_shard = 0;
  walk(i, [&](uint32_t dimm, const ShardOp& op) {
    switch (op.kind) {
      case ShardOp::kLoad:
        ++c.loads;
        if (static_cast<int64_t>(dimm) != last_dimm || op.shard != last_shard) {
          ++c.shards;
          last_dimm = dimm;
          last_shard = op.shard;
        }
        break;
      case ShardOp::kCompute: ++c.computes; break;
      case ShardOp::kRead: ++c.reads; break;
    }
  });
  return c;
}

ShardCounts ShardPlanner::count_all() const {
  ShardCounts c;
  for (uint32_t i = 0; i < num_intervals_; ++i) c += count(i);
  return c;
}

ShardCounts count_shard_loads(const CsrGraph& g, const Placement& p,
                              const ShardConfig& shard) {
  return ShardPlanner(g, nullptr, p, shard, true).count_all();
}

// ---- WindowScheduler --------------------------------------------------------

WindowScheduler::WindowScheduler(uint32_t window, uint32_t num_dimms,
                                 uint32_t num_intervals, uint32_t width,
                                 uint32_t dim)
    : window_(window),
      num_dimms_(num_dimms),
      num_intervals_(num_intervals),
      width_(width),
      dim_(dim),
      next_(num_dimms, 0),
      issuing_(num_dimms, 0),
      slots_(window) {
  if (window == 0) throw ConfigError("window must be >= 1");
  if (num_dimms == 0) throw ConfigError("no DIMMs to schedule");
}

WindowScheduler::Slot& WindowScheduler::slot_for(uint32_t interval) {
  return slots_[interval % window_];
}

const WindowScheduler::Slot& WindowScheduler::slot_for(
    uint32_t interval) const {
  return slots_[interval % window_];
}

bool WindowScheduler::may_admit(uint32_t dimm) const {
  return !issuing_[dimm] && next_[dimm] < num_intervals_ &&
         next_[dimm] < committed_ + window_;
}

uint32_t WindowScheduler::admit(uint32_t dimm, uint32_t partials) {
  if (!may_admit(dimm)) throw StateError("interval admitted outside window");
  uint32_t i = next_[dimm]++;
  Slot& s = slot_for(i);
  if (s.interval != i) {
    s.interval = i;
    s.admitted = 0;
    s.expected = 0;
    s.merged = 0;
    s.rows.assign(std::size_t{width_} * dim_, 0.0f);
  }
  ++s.admitted;
  s.expected += partials;
  issuing_[dimm] = 1;
  return i;
}

void WindowScheduler::merge(uint32_t interval, uint32_t slot,
                            std::span<const float> partial) {
  merge_count(interval);
  if (slot >= width_) throw ProtocolError("partial slot beyond interval width");
  Slot& s = slot_for(interval);
  merge_partials(std::span<float>(s.rows).subspan(std::size_t{slot} * dim_,
                                                  dim_),
                 partial);
}

void WindowScheduler::merge_count(uint32_t interval) {
  if (interval < committed_) {
    throw ProtocolError("partial result for committed interval " +
                        std::to_string(interval));
  }
  Slot& s = slot_for(interval);
  if (interval >= committed_ + window_ || s.interval != interval) {
    throw ProtocolError("partial result for an interval outside the window");
  }
  if (++s.merged > s.expected) {
    throw ProtocolError("more partial results than readouts issued");
  }
}

bool WindowScheduler::ready_to_commit() const {
  if (done()) return false;
  const Slot& s = slot_for(committed_);
  return s.interval == committed_ && s.admitted == num_dimms_ &&
         s.merged == s.expected;
}

std::vector<float> WindowScheduler::commit() {
  if (!ready_to_commit()) throw StateError("commit before all partials merged");
  Slot& s = slot_for(committed_);
  std::vector<float> rows = std::move(s.rows);
  s.interval = UINT32_MAX;
  commit_log_.push_back(committed_);
  ++committed_;
  return rows;
}

IeoTraffic ieo_traffic(uint64_t closed_edges, uint64_t vertices, uint32_t d_in,
                       uint32_t d_out) {
  const double e = static_cast<double>(closed_edges);
  const double v = static_cast<double>(vertices);
  return {e * d_in + v * d_out, e * d_out + v * d_in};
}

}  // namespace gnnear
