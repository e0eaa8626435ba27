#include "gnnear/simulator.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <memory>
#include <queue>
#include <sstream>
#include <unordered_map>

#include "gnnear/bf16.h"
#include "gnnear/cae.h"
#include "gnnear/common.h"
#include "gnnear/isa.h"
#include "gnnear/nme.h"
#include "sim_core.h"

namespace gnnear {

// ---- Options ----------------------------------------------------------------

Toggles Toggles::all_off() {
  Toggles t;
  t.nmp = t.narrow_shard = t.hgp = t.broadcast = false;
  t.window = t.interleave = t.overlap = t.ieo = false;
  return t;
}

void Toggles::validate() const {
  if (broadcast && !hgp) {
    throw ConfigError("broadcast writes need hybrid partitioning (hgp)");
  }
  if (overlap && !nmp) {
    throw ConfigError("inter-shard overlap needs near-memory processing (nmp)");
  }
}

std::string Toggles::to_string() const {
  std::string s;
  auto add = [&](const char* name, bool on) {
    if (!s.empty()) s += ',';
    s += name;
    s += on ? "=1" : "=0";
  };
  add("nmp", nmp);
  add("narrow_shard", narrow_shard);
  add("hgp", hgp);
  add("broadcast", broadcast);
  add("window", window);
  add("interleave", interleave);
  add("overlap", overlap);
  add("ieo", ieo);
  return s;
}

PartitionConfig SimOptions::partition_config() const {
  PartitionConfig p;
  p.channels = shape.channels;
  p.dimms_per_channel = shape.dimms_per_channel;
  p.ranks_per_dimm = shape.ranks_per_dimm;
  p.dimm_capacity_bytes = shape.dimm_capacity_bytes;
  p.mode = toggles.hgp ? PartitionMode::kHybrid : PartitionMode::kEven;
  p.lambda = toggles.hgp ? lambda : 0.0;
  p.interleave = toggles.interleave;
  return p;
}

void SimOptions::validate() const {
  toggles.validate();
  shard.validate();
  if (window_size == 0) throw ConfigError("window must be >= 1");
  if (shape.channels == 0 || shape.dimms_per_channel == 0 ||
      shape.ranks_per_dimm == 0) {
    throw ConfigError("system needs channels, DIMMs and ranks");
  }
  if (shape.dimms_per_channel > isa::kMaxDimm + 1) {
    throw ConfigError("at most 16 DIMMs per channel fit the DIMM field");
  }
  if (shape.channels > 255) throw ConfigError("too many channels");
  if (!(lambda >= 0.0 && lambda <= 0.5)) {
    throw ConfigError("lambda must lie in [0, 0.5]");
  }
  partition_config().validate();
  timing.validate();
  gnnear::validate(nme);
  gnnear::validate(cae);
  energy.validate();
}

std::string describe(const SimOptions& o) {
  std::ostringstream s;
  s << o.toggles.to_string() << ";R=" << o.shard.R << ";C=" << o.shard.C
    << ";W=" << o.effective_window() << ";shape=" << o.shape.channels << 'x'
    << o.shape.dimms_per_channel << 'x' << o.shape.ranks_per_dimm
    << ";lambda=" << (o.toggles.hgp ? o.lambda : 0.0)
    << ";timed=" << o.timed << ";fp32_count=" << o.count_as_fp32;
  return s.str();
}

// ---- Tail helpers -------------------------------------------------------------

namespace {

void rows_matmul(const Matrix& a, const Matrix& b, Matrix& c, VertexRange r,
                 Precision p) {
  std::vector<double> acc(b.cols);
  for (uint32_t i = r.begin; i < r.end; ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (uint32_t k = 0; k < a.cols; ++k) {
      double x = a.at(i, k);
      if (x == 0.0) continue;
      auto br = b.row(k);
      for (uint32_t j = 0; j < b.cols; ++j) acc[j] += x * br[j];
    }
    for (uint32_t j = 0; j < b.cols; ++j) c.at(i, j) = round_store(acc[j], p);
  }
}

// c = a * b^T
void rows_matmul_bt(const Matrix& a, const Matrix& b, Matrix& c,
                    VertexRange r, Precision p) {
  for (uint32_t i = r.begin; i < r.end; ++i) {
    auto ar = a.row(i);
    for (uint32_t j = 0; j < b.rows; ++j) {
      auto br = b.row(j);
      double acc = 0.0;
      for (uint32_t k = 0; k < a.cols; ++k) acc += double{ar[k]} * br[k];
      c.at(i, j) = round_store(acc, p);
    }
  }
}

void rows_acc_atb(std::vector<double>& acc, const Matrix& a, const Matrix& b,
                  VertexRange r) {
  for (uint32_t row = r.begin; row < r.end; ++row) {
    auto ar = a.row(row);
    auto br = b.row(row);
    for (uint32_t i = 0; i < a.cols; ++i) {
      double x = ar[i];
      if (x == 0.0) continue;
      double* dst = acc.data() + std::size_t{i} * b.cols;
      for (uint32_t j = 0; j < b.cols; ++j) dst[j] += x * br[j];
    }
  }
}

void rows_acc_colsum(std::vector<double>& acc, const Matrix& b,
                     VertexRange r) {
  for (uint32_t row = r.begin; row < r.end; ++row) {
    for (uint32_t j = 0; j < b.cols; ++j) acc[j] += b.at(row, j);
  }
}

void finish_grad(std::vector<float>& g, const std::vector<double>& acc) {
  for (std::size_t i = 0; i < acc.size(); ++i) {
    g[i] = static_cast<float>(g[i] + acc[i]);
  }
}

}  // namespace

// ---- SimCore: functional state and accounting --------------------------------

std::vector<PhaseDef> split_phases(const std::vector<EpochOp>& ops) {
  std::vector<PhaseDef> out;
  std::size_t i = 0;
  PhaseDef prefix;
  for (; i < ops.size() && ops[i].kind != OpKind::kAggregate; ++i) {
    prefix.tail.push_back(ops[i]);
  }
  if (!prefix.tail.empty()) out.push_back(prefix);
  while (i < ops.size()) {
    PhaseDef ph;
    ph.has_aggregate = true;
    ph.agg = ops[i++];
    for (; i < ops.size() && ops[i].kind != OpKind::kAggregate; ++i) {
      ph.tail.push_back(ops[i]);
    }
    out.push_back(ph);
  }
  return out;
}

SimCore::SimCore(const SimInputs& in, const SimOptions& opt)
    : in_(in), opt_(opt), g_(require_graph(in)), cfg_(in.model) {
  opt_.validate();
  cfg_.validate();
  g_.validate();
  if (g_.num_vertices == 0) throw ParamError("graph has no vertices");
  if (in.features.rows != g_.num_vertices ||
      in.features.cols != cfg_.dims[0].d_in) {
    throw ConfigError("input features must be vertices x first-layer width");
  }
  if (in.labels.size() != g_.num_vertices) {
    throw ConfigError("label count must equal vertex count");
  }
  if (in.state.weights.size() != cfg_.num_layers()) {
    throw ConfigError("initial state does not match the model depth");
  }
  L_ = cfg_.num_layers();
  prec_ = cfg_.precision;
  eb_ = cfg_.element_bytes();
  ceb_ = opt_.count_as_fp32 ? 4 : eb_;
  ops_ = plan_epoch(cfg_, opt_.toggles.ieo);
  phases_ = split_phases(ops_);
  check_scratchpad(cfg_, opt_.cae);
  if (!g_.symmetric) {
    gt_storage_ = g_.transposed();
    gt_ = &gt_storage_;
  } else {
    gt_ = &g_;
  }

  placement_ = make_placement(g_, opt_.partition_config());
  std::vector<RegionSpec> regions;
  for (uint32_t l = 0; l < L_; ++l) {
    const auto& d = cfg_.dims[l];
    regions.push_back({DataType::kH, l, d.d_in * eb_});
    regions.push_back({DataType::kA, l, d.d_in * eb_});
    if (ieo(l)) {
      regions.push_back({DataType::kP, l, d.d_out * eb_});
      regions.push_back({DataType::kDp, l, d.d_out * eb_});
    } else if (l > 0) {
      regions.push_back({DataType::kD, l, d.d_in * eb_});
    }
  }
  regions.push_back({DataType::kH, L_, cfg_.dims.back().d_out * eb_});
  amap_ = std::make_unique<AddressMap>(placement_, opt_.timing,
                                       opt_.shape.ranks_per_dimm, regions,
                                       opt_.shape.dimm_capacity_bytes);

  for (const auto& ph : phases_) {
    if (!ph.has_aggregate) continue;
    Source s = source_of(ph.agg);
    sources_.push_back({s.type, s.layer});
    if (opt_.toggles.nmp) {
      const uint32_t vb = s.dim * eb_;
      if (vb > isa::kMaxVectorSize) {
        throw ConfigError("vertex vector of " + std::to_string(vb) +
                          " bytes exceeds the 4096-byte instruction field");
      }
      uint64_t need = shard_buffer_bytes(opt_.shard.R, opt_.shard.C, vb,
                                         opt_.toggles.overlap);
      if (need > opt_.nme.buffer_bytes) {
        throw ConfigError("shard " + std::to_string(opt_.shard.R) + "x" +
                          std::to_string(opt_.shard.C) + " needs " +
                          std::to_string(need) + " buffer bytes; the NME has " +
                          std::to_string(opt_.nme.buffer_bytes));
      }
    }
  }

  const uint32_t n = g_.num_vertices;
  h_.resize(L_ + 1);
  a_.resize(L_);
  z_.resize(L_);
  t_.resize(L_);
  p_.resize(L_);
  dp_.resize(L_);
  d_.resize(L_);
  gh_.resize(L_ + 1);
  G_.resize(L_);
  ew_fwd_.resize(L_);
  ew_bwd_.resize(L_);
  acc_.resize(L_);
  if (opt_.functional) {
    h_[0] = in.features;
    for (float& v : h_[0].data) v = round_store(v, prec_);
    for (uint32_t l = 0; l < L_; ++l) {
      const auto& d = cfg_.dims[l];
      h_[l + 1] = Matrix(n, d.d_out);
      a_[l] = Matrix(n, d.d_in);
      z_[l] = Matrix(n, d.d_out);
      if (cfg_.variant == Variant::kGin) t_[l] = Matrix(n, d.d_out);
      if (ieo(l)) {
        p_[l] = Matrix(n, d.d_out);
        G_[l] = Matrix(n, d.d_out);
      }
      dp_[l] = Matrix(n, d.d_out);
      d_[l] = Matrix(n, d.d_in);
      gh_[l + 1] = Matrix(n, d.d_out);
      const LayerParams& w = in.state.weights[l];
      acc_[l].w.assign(w.w.data.size(), 0.0);
      acc_[l].w2.assign(w.w2.data.size(), 0.0);
      acc_[l].b1.assign(w.b1.size(), 0.0);
      acc_[l].b2.assign(w.b2.size(), 0.0);
    }
  }

  const uint32_t C = opt_.shape.channels;
  const uint32_t D = placement_.num_dimms();
  counters_.channel_read_bytes.assign(C, 0);
  counters_.channel_write_bytes.assign(C, 0);
  counters_.dimm_local_read_bytes.assign(D, 0);
  counters_.dimm_local_write_bytes.assign(D, 0);
  counters_.layers.assign(2 * std::size_t{L_}, {});
  trace_.assign(C, {});
}

const CsrGraph& SimCore::require_graph(const SimInputs& in) {
  if (!in.graph) throw ParamError("no graph supplied");
  return *in.graph;
}

bool SimCore::ieo(uint32_t l) const {
  return ieo_applies(cfg_, l, opt_.toggles.ieo);
}

SimCore::Source SimCore::source_of(const EpochOp& agg) {
  const uint32_t l = agg.layer;
  const bool fwd = agg.dir == Direction::kForward;
  Source s;
  s.layer = l;
  s.dim = agg.dim;
  if (fwd) {
    s.type = ieo(l) ? DataType::kP : DataType::kH;
    s.src = ieo(l) ? &p_[l] : &h_[l];
    s.dst = ieo(l) ? &z_[l] : &a_[l];
  } else {
    s.type = ieo(l) ? DataType::kDp : DataType::kD;
    s.src = ieo(l) ? &dp_[l] : &d_[l];
    s.dst = ieo(l) ? &G_[l] : &gh_[l];
  }
  return s;
}

bool SimCore::is_source(DataType t, uint32_t layer) const {
  for (const auto& s : sources_) {
    if (s.first == t && s.second == layer) return true;
  }
  return false;
}

uint32_t SimCore::num_intervals() const {
  return static_cast<uint32_t>(ceil_div(g_.num_vertices, opt_.shard.C));
}

VertexRange SimCore::interval_range(uint32_t i) const {
  uint32_t b = i * opt_.shard.C;
  return {b, std::min(g_.num_vertices, b + opt_.shard.C)};
}

uint64_t SimCore::begin_phase(std::size_t k) {
  cur_ = PhaseState{};
  cur_.index = k;
  cur_.def = phases_[k];
  PhaseLog log;
  log.has_aggregate = cur_.def.has_aggregate;
  uint64_t attention_cycles = 0;
  if (cur_.def.has_aggregate) {
    const EpochOp& agg = cur_.def.agg;
    log.layer = agg.layer;
    log.dir = agg.dir;
    cur_.src = source_of(agg);
    const uint32_t l = agg.layer;
    const bool fwd = agg.dir == Direction::kForward;
    if (fwd) {
      if (opt_.functional) {
        ew_fwd_[l] = forward_edge_weights(g_, cfg_, in_.state.weights[l], h_[l]);
        if (l == 0 && opt_.fault_edge >= 0) {
          auto& w = ew_fwd_[0];
          if (!w.nbr_w.empty()) {
            w.nbr_w[static_cast<uint64_t>(opt_.fault_edge) % w.nbr_w.size()] *= 2;
          } else {
            w.self_w[static_cast<uint64_t>(opt_.fault_edge) % w.self_w.size()] *= 2;
          }
        }
      }
      if (cfg_.variant == Variant::kGat) {
        uint64_t elems = 2ull * g_.num_vertices * cfg_.dims[l].d_in +
                         4ull * g_.closed_edge_count();
        counters_.vpu_ops += elems;
        attention_cycles = vpu_cycles(elems, opt_.cae);
      }
      cur_.graph = &g_;
      cur_.weights = opt_.functional ? &ew_fwd_[l] : nullptr;
    } else {
      if (opt_.functional) {
        ew_bwd_[l] = transpose_edge_weights(g_, *gt_, ew_fwd_[l]);
      }
      cur_.graph = gt_;
      cur_.weights = opt_.functional ? &ew_bwd_[l] : nullptr;
    }
    cur_.planner = std::make_unique<ShardPlanner>(
        *cur_.graph, cur_.weights, placement_, opt_.shard,
        opt_.toggles.narrow_shard);
    if (cfg_.variant == Variant::kGin) {
      cur_.planner->set_ops(isa::AggOp::kWeightedSum, isa::AggOp::kSum);
    } else if (fwd && cfg_.variant == Variant::kSage) {
      cur_.planner->set_ops(isa::AggOp::kMean, isa::AggOp::kMean);
    }
    cur_.vb = cur_.src.dim * eb_;
    cur_.cvb = cur_.src.dim * ceb_;
    cur_.lc = &counters_.layer(l, !fwd);
    if (opt_.audit) {
      readout_bytes_.emplace_back(g_.num_vertices, 0);
      readout_vb_.push_back(cur_.cvb);
    }
  }
  phase_logs_.push_back(std::move(log));
  return attention_cycles;
}

const std::vector<DimmProgram>& SimCore::programs(uint32_t interval) {
  auto it = plan_cache_.find(interval);
  if (it == plan_cache_.end()) {
    it = plan_cache_.emplace(interval, cur_.planner->plan(interval)).first;
  }
  return it->second;
}

void SimCore::release_programs(uint32_t interval) {
  plan_cache_.erase(interval);
}

std::vector<uint64_t> SimCore::program_words(const DimmProgram& prog) const {
  std::vector<uint64_t> words;
  words.reserve(prog.ops.size());
  const uint8_t local = static_cast<uint8_t>(prog.dimm % opt_.shape.dimms_per_channel);
  for (const ShardOp& op : prog.ops) {
    switch (op.kind) {
      case ShardOp::kLoad:
        words.push_back(isa::encode(isa::LType{
            local,
            amap_->daddr(op.vertex, cur_.src.type, cur_.src.layer, prog.dimm),
            cur_.vb}));
        break;
      case ShardOp::kCompute:
        words.push_back(isa::encode(
            isa::CType{local, op.op, float_to_bf16(op.weight), op.slot}));
        break;
      case ShardOp::kRead:
        words.push_back(isa::encode(isa::RType{local, op.slot, cur_.vb}));
        break;
    }
  }
  return words;
}

void SimCore::log_words(uint32_t channel, const std::vector<uint64_t>& words) {
  if (!opt_.record_trace) return;
  auto& t = trace_[channel];
  t.insert(t.end(), words.begin(), words.end());
}

void SimCore::account_program(const DimmProgram& prog) {
  if (prog.empty()) return;
  LayerCounters& lc = *cur_.lc;
  const uint64_t cvb = cur_.cvb;
  const uint32_t ch = prog.dimm / opt_.shape.dimms_per_channel;
  lc.l_types += prog.loads;
  lc.c_types += prog.computes;
  lc.r_types += prog.reads;
  lc.reduce_source_bytes += prog.computes * cvb;
  if (opt_.toggles.nmp) {
    counters_.local_read_bytes += prog.loads * cvb;
    counters_.dimm_local_read_bytes[prog.dimm] += prog.loads * cvb;
    counters_.off_chip_read_bytes += prog.reads * cvb;
    counters_.channel_read_bytes[ch] += prog.reads * cvb;
    lc.reduce_off_chip_bytes += prog.reads * cvb;
    counters_.eu_mac_ops += uint64_t{prog.computes} * cur_.src.dim;
    if (opt_.audit) {
      for (const ShardOp& op : prog.ops) {
        if (op.kind == ShardOp::kRead) {
          readout_bytes_.back()[op.vertex] += cvb;
        }
      }
    }
  } else {
    counters_.off_chip_read_bytes += prog.loads * cvb;
    counters_.channel_read_bytes[ch] += prog.loads * cvb;
    lc.reduce_off_chip_bytes += prog.loads * cvb;
    counters_.vpu_ops += uint64_t{prog.computes} * cur_.src.dim;
  }
}

std::span<const float> SimCore::source_row(uint32_t v) const {
  return cur_.src.src->row(v);
}

void SimCore::commit_rows(uint32_t interval, const std::vector<float>& rows) {
  if (!opt_.functional) return;
  VertexRange r = interval_range(interval);
  Matrix& dst = *cur_.src.dst;
  const uint32_t dim = cur_.src.dim;
  for (uint32_t v = r.begin; v < r.end; ++v) {
    const float* src = rows.data() + std::size_t{v - r.begin} * dim;
    for (uint32_t k = 0; k < dim; ++k) dst.at(v, k) = round_store(src[k], prec_);
  }
}

// ---- Tail operations ---------------------------------------------------------

void SimCore::add_read(TailWork& w, VertexRange r, DataType type,
                       uint32_t layer) {
  const uint64_t cvb = uint64_t{amap_->vector_bytes(type, layer) / eb_} * ceb_;
  for (uint32_t v = r.begin; v < r.end; ++v) {
    HostAccess a{v, type, layer, false, false, {placement_.home_global(v)}};
    const uint32_t ch = placement_.home_channel[v];
    counters_.off_chip_read_bytes += cvb;
    counters_.channel_read_bytes[ch] += cvb;
    w.accesses.push_back(std::move(a));
  }
}

void SimCore::add_write(TailWork& w, VertexRange r, DataType type,
                        uint32_t layer) {
  const uint32_t vb = amap_->vector_bytes(type, layer);
  const uint64_t cvb = uint64_t{vb / eb_} * ceb_;
  const bool replicate = is_source(type, layer);
  const uint32_t D = opt_.shape.dimms_per_channel;
  for (uint32_t v = r.begin; v < r.end; ++v) {
    const uint32_t ch = placement_.home_channel[v];
    if (replicate && placement_.duplicated[v]) {
      std::vector<uint32_t> all;
      for (uint32_t d = 0; d < D; ++d) all.push_back(placement_.global_dimm(ch, d));
      for (uint32_t g : all) {
        counters_.local_write_bytes += cvb;
        counters_.dimm_local_write_bytes[g] += cvb;
      }
      if (opt_.toggles.broadcast) {
        counters_.off_chip_write_bytes += cvb;
        counters_.channel_write_bytes[ch] += cvb;
        counters_.dup_write_bytes += cvb;
        if (std::find(w.broadcast_channels.begin(), w.broadcast_channels.end(),
                      ch) == w.broadcast_channels.end()) {
          w.broadcast_channels.push_back(ch);
        }
        w.accesses.push_back({v, type, layer, true, true, std::move(all)});
      } else {
        for (uint32_t g : all) {
          counters_.off_chip_write_bytes += cvb;
          counters_.channel_write_bytes[ch] += cvb;
          counters_.dup_write_bytes += cvb;
          w.accesses.push_back({v, type, layer, true, false, {g}});
        }
      }
    } else {
      const uint32_t g = placement_.home_global(v);
      counters_.off_chip_write_bytes += cvb;
      counters_.channel_write_bytes[ch] += cvb;
      counters_.local_write_bytes += cvb;
      counters_.dimm_local_write_bytes[g] += cvb;
      w.accesses.push_back({v, type, layer, true, false, {g}});
    }
  }
}

void SimCore::gemm(TailWork& w, uint64_t M, uint64_t K, uint64_t N) {
  w.gemm_cycles += gemm_cycles(M, K, N, opt_.cae);
  counters_.gemm_flops += 2 * M * K * N;
}

void SimCore::vpu(TailWork& w, uint64_t elements) {
  w.vpu_cycles += vpu_cycles(elements, opt_.cae);
  counters_.vpu_ops += elements;
}

TailWork SimCore::run_tail(uint32_t interval) {
  TailWork w;
  w.interval = interval;
  const VertexRange r = interval_range(interval);
  const uint64_t m = r.end - r.begin;
  const bool fn = opt_.functional;
  const bool gin = cfg_.variant == Variant::kGin;
  for (const EpochOp& op : cur_.def.tail) {
    const uint32_t l = op.layer;
    const LayerDims dims = cfg_.dims[l];
    const LayerParams& wt = in_.state.weights[l];
    switch (op.kind) {
      case OpKind::kAggregate:
        break;
      case OpKind::kProject:
        add_read(w, r, DataType::kH, l);
        counters_.layer(l, false).update_stream_bytes += m * dims.d_in * ceb_;
        gemm(w, m, dims.d_in, dims.d_out);
        if (fn) rows_matmul(h_[l], wt.w, p_[l], r, prec_);
        add_write(w, r, DataType::kP, l);
        break;
      case OpKind::kUpdateFwd:
      case OpKind::kActivateFwd: {
        const bool update = op.kind == OpKind::kUpdateFwd;
        if (update) {
          gemm(w, m, dims.d_in, dims.d_out);
          counters_.layer(l, false).update_stream_bytes += m * dims.d_out * ceb_;
          if (fn) rows_matmul(a_[l], wt.w, z_[l], r, prec_);
        }
        vpu(w, m * dims.d_out * (gin ? 3 : 1));
        if (gin) gemm(w, m, dims.d_out, dims.d_out);
        if (fn) activate(l, r);
        if (update) add_write(w, r, DataType::kA, l);
        add_write(w, r, DataType::kH, l + 1);
        break;
      }
      case OpKind::kLoss: {
        vpu(w, m * cfg_.dims.back().d_out);
        if (fn) loss_rows(r);
        break;
      }
      case OpKind::kHeadBwd: {
        add_read(w, r, DataType::kH, l + 1);
        vpu(w, m * dims.d_out);
        if (gin) {
          gemm(w, m, dims.d_out, dims.d_out);
          vpu(w, m * dims.d_out * dims.d_out);
        }
        if (fn) head_backward(l, r);
        if (ieo(l)) add_write(w, r, DataType::kDp, l);
        break;
      }
      case OpKind::kUpdateBwd:
      case OpKind::kUpdateBwdIeo: {
        const bool interchanged = op.kind == OpKind::kUpdateBwdIeo;
        add_read(w, r, interchanged ? DataType::kH : DataType::kA, l);
        vpu(w, m * dims.d_in * dims.d_out);
        if (l > 0) gemm(w, m, dims.d_out, dims.d_in);
        if (fn) {
          const Matrix& lhs = interchanged ? h_[l] : a_[l];
          const Matrix& g = interchanged ? G_[l] : dp_[l];
          rows_acc_atb(acc_[l].w, lhs, g, r);
          if (l > 0) rows_matmul_bt(g, wt.w, interchanged ? gh_[l] : d_[l], r, prec_);
        }
        if (!interchanged && l > 0) add_write(w, r, DataType::kD, l);
        break;
      }
    }
  }
  counters_.b_types += w.broadcast_channels.size();
  return w;
}

void SimCore::activate(uint32_t l, VertexRange r) {
  const LayerParams& wt = in_.state.weights[l];
  Matrix& z = z_[l];
  Matrix& h = h_[l + 1];
  if (cfg_.variant == Variant::kGin) {
    Matrix& t = t_[l];
    for (uint32_t v = r.begin; v < r.end; ++v) {
      for (uint32_t c = 0; c < z.cols; ++c) {
        z.at(v, c) = round_store(double{z.at(v, c)} + wt.b1[c], prec_);
        t.at(v, c) = std::max(z.at(v, c), 0.0f);
      }
    }
    rows_matmul(t, wt.w2, h, r, prec_);
    for (uint32_t v = r.begin; v < r.end; ++v) {
      for (uint32_t c = 0; c < h.cols; ++c) {
        h.at(v, c) = round_store(double{h.at(v, c)} + wt.b2[c], prec_);
      }
    }
    return;
  }
  for (uint32_t v = r.begin; v < r.end; ++v) {
    for (uint32_t c = 0; c < z.cols; ++c) {
      const float x = z.at(v, c);
      if (cfg_.variant == Variant::kGat) {
        double d = x;
        h.at(v, c) = round_store(d > 0 ? d : std::expm1(d), prec_);
      } else {
        h.at(v, c) = std::max(x, 0.0f);
      }
    }
  }
}

void SimCore::loss_rows(VertexRange r) {
  const Matrix& x = h_[L_];
  Matrix& grad = gh_[L_];
  const double inv_n = 1.0 / g_.num_vertices;
  std::vector<double> e(x.cols);
  for (uint32_t v = r.begin; v < r.end; ++v) {
    const uint32_t label = in_.labels[v];
    if (label >= x.cols) throw ConfigError("label out of range");
    auto row = x.row(v);
    double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (uint32_t c = 0; c < x.cols; ++c) sum += (e[c] = std::exp(row[c] - mx));
    loss_acc_ += std::log(sum) - (row[label] - mx);
    for (uint32_t c = 0; c < x.cols; ++c) {
      double gval = e[c] / sum - (c == label ? 1.0 : 0.0);
      grad.at(v, c) = round_store(gval * inv_n, prec_);
    }
  }
}

void SimCore::head_backward(uint32_t l, VertexRange r) {
  const LayerParams& wt = in_.state.weights[l];
  const Matrix& grad = gh_[l + 1];
  Matrix& dp = dp_[l];
  const Matrix& z = z_[l];
  if (cfg_.variant == Variant::kGin) {
    rows_acc_atb(acc_[l].w2, t_[l], grad, r);
    rows_acc_colsum(acc_[l].b2, grad, r);
    rows_matmul_bt(grad, wt.w2, dp, r, prec_);
    for (uint32_t v = r.begin; v < r.end; ++v) {
      for (uint32_t c = 0; c < dp.cols; ++c) {
        if (!(z.at(v, c) > 0)) dp.at(v, c) = 0.0f;
      }
    }
    rows_acc_colsum(acc_[l].b1, dp, r);
    return;
  }
  for (uint32_t v = r.begin; v < r.end; ++v) {
    for (uint32_t c = 0; c < dp.cols; ++c) {
      double zz = z.at(v, c);
      double m = zz > 0 ? 1.0
                        : (cfg_.variant == Variant::kGat ? std::exp(zz) : 0.0);
      dp.at(v, c) = round_store(grad.at(v, c) * m, prec_);
    }
  }
}

void SimCore::finish(SimResult& out) {
  out.counters = counters_;
  out.placement = placement_;
  out.trace = std::move(trace_);
  out.phases = std::move(phase_logs_);
  out.readout_bytes = std::move(readout_bytes_);
  out.readout_vector_bytes = std::move(readout_vb_);
  if (!opt_.functional) return;
  out.loss = loss_acc_ / g_.num_vertices;
  out.h = h_;
  out.grad_h.assign(L_ + 1, Matrix());
  for (uint32_t l = 1; l < L_; ++l) out.grad_h[l] = gh_[l];
  TrainerState s = in_.state;
  zero_grads(s);
  for (uint32_t l = 0; l < L_; ++l) {
    finish_grad(s.grads[l].w.data, acc_[l].w);
    finish_grad(s.grads[l].w2.data, acc_[l].w2);
    finish_grad(s.grads[l].b1, acc_[l].b1);
    finish_grad(s.grads[l].b2, acc_[l].b2);
  }
  s.loss = out.loss;
  out.grads = s.grads;
  sgd_step(s, cfg_.learning_rate);
  out.updated = std::move(s);
}

}  // namespace gnnear
