#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

#include "gnnear/bf16.h"
#include "gnnear/common.h"
#include "gnnear/isa.h"
#include "gnnear/nme.h"
#include "sim_core.h"

namespace gnnear {
namespace {

void log_broadcasts(SimCore& core, const TailWork& w) {
  for (uint32_t ch : w.broadcast_channels) {
    core.log_words(ch, {isa::encode(isa::BType{})});
  }
}

void execute(SimCore& core, const DimmProgram& prog, NmeDatapath& dp,
             std::vector<float>& rows, uint32_t dim) {
  const uint32_t dpc = core.options().shape.dimms_per_channel;
  const uint8_t local = static_cast<uint8_t>(prog.dimm % dpc);
  const uint32_t vb = core.phase_vector_bytes();
  uint32_t shard = UINT32_MAX;
  for (const ShardOp& op : prog.ops) {
    const uint64_t tag = (uint64_t{op.shard} << 32) | op.vertex;
    switch (op.kind) {
      case ShardOp::kLoad:
        if (op.shard != shard) {
          dp.evict_all();
          shard = op.shard;
        }
        dp.exec_l(tag, core.source_row(op.vertex));
        break;
      case ShardOp::kCompute:
        dp.exec_c(isa::CType{local, op.op, float_to_bf16(op.weight), op.slot},
                  tag, op.weight);
        break;
      case ShardOp::kRead: {
        std::vector<float> part = dp.exec_r(isa::RType{local, op.slot, vb});
        merge_partials(std::span<float>(rows.data() + std::size_t{op.slot} * dim, dim),
                       part);
        break;
      }
    }
  }
  dp.evict_all();
}

}  // namespace

void run_sequential(SimCore& core, SimResult& out) {
  (void)out;
  const SimOptions& opt = core.options();
  const uint32_t D = core.placement().num_dimms();
  const uint32_t dpc = opt.shape.dimms_per_channel;
  const bool nmp = opt.toggles.nmp;
  NmeConfig cfg = opt.nme;
  if (!nmp) {
    cfg.buffer_bytes = static_cast<uint32_t>(
        std::min<uint64_t>(opt.cae.scratchpad_bytes, UINT32_MAX));
  }
  Counters& c = core.counters();
  for (std::size_t k = 0; k < core.num_phases(); ++k) {
    const uint64_t attention = core.begin_phase(k);
    c.vpu_busy_cycles += attention;
    const uint32_t n = core.num_intervals();
    if (!core.phase_has_aggregate()) {
      for (uint32_t i = 0; i < n; ++i) log_broadcasts(core, core.run_tail(i));
      continue;
    }
    const uint32_t dim = core.phase_dim();
    std::vector<std::unique_ptr<NmeDatapath>> dps(D);
    if (opt.functional) {
      for (auto& dp : dps) {
        dp = std::make_unique<NmeDatapath>(cfg, dim, core.phase_vector_bytes(),
                                           opt.shard.C, core.precision());
      }
    }
    auto log_programs = [&](uint32_t i) {
      if (!nmp) return;
      for (const DimmProgram& p : core.programs(i)) {
        if (!p.empty()) core.log_words(p.dimm / dpc, core.program_words(p));
      }
    };
    if (n > 0) log_programs(0);
    for (uint32_t i = 0; i < n; ++i) {
      std::vector<float> rows;
      if (opt.functional) rows.assign(std::size_t{opt.shard.C} * dim, 0.0f);
      for (const DimmProgram& p : core.programs(i)) {
        core.account_program(p);
        if (opt.functional) execute(core, p, *dps[p.dimm], rows, dim);
      }
      core.commit_rows(i, rows);
      core.phase_log().commits.push_back(i);
      core.release_programs(i);
      if (i + 1 < n) log_programs(i + 1);
      log_broadcasts(core, core.run_tail(i));
    }
    for (const auto& dp : dps) {
      if (dp) {
        c.buffer_high_water = std::max(c.buffer_high_water, dp->high_water_bytes());
      }
    }
  }
}

SimResult simulate_epoch(const SimInputs& in, const SimOptions& opt) {
  SimCore core(in, opt);
  SimResult out;
  if (opt.timed) {
    run_timed(core, out);
  } else {
    run_sequential(core, out);
  }
  core.finish(out);
  return out;
}

std::vector<std::vector<uint64_t>> base_workflow_trace(const SimInputs& in,
                                                       const SimOptions& opt) {
  SimOptions o = opt;
  o.timed = false;
  o.record_trace = true;
  o.record_commands = false;
  o.audit = false;
  SimCore core(in, o);
  SimResult out;
  run_sequential(core, out);
  core.finish(out);
  return std::move(out.trace);
}

namespace {

struct Fnv {
  uint64_t h = 1469598103934665603ull;
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  }
  template <typename T>
  void value(const T& v) {
    bytes(&v, sizeof(v));
  }
  template <typename T>
  void vec(const std::vector<T>& v) {
    value<uint64_t>(v.size());
    if (!v.empty()) bytes(v.data(), v.size() * sizeof(T));
  }
  void matrix(const Matrix& m) {
    value(m.rows);
    value(m.cols);
    vec(m.data);
  }
};

}  // namespace

std::string workload_fingerprint(const SimInputs& in) {
  Fnv f;
  if (in.graph != nullptr) {
    f.value(in.graph->num_vertices);
    f.vec(in.graph->row_ptr);
    f.vec(in.graph->col_idx);
    f.value(in.graph->symmetric);
  }
  const ModelConfig& m = in.model;
  f.value(m.variant);
  f.value(m.precision);
  f.value(m.learning_rate);
  f.value(m.gin_eps);
  f.value(m.gat_slope);
  for (const LayerDims& d : m.dims) {
    f.value(d.d_in);
    f.value(d.d_out);
  }
  for (const LayerParams& p : in.state.weights) {
    f.matrix(p.w);
    f.matrix(p.w2);
    f.vec(p.b1);
    f.vec(p.b2);
    f.matrix(p.att_w1);
    f.matrix(p.att_w2);
    f.vec(p.att_a);
  }
  f.matrix(in.features);
  f.vec(in.labels);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(f.h));
  return buf;
}

double tolerance_for(Precision p) {
  return p == Precision::kBf16 ? 2e-2 : 1e-4;
}

namespace {

class Checker {
 public:
  explicit Checker(double tol) : tol_(tol) {}

  void compare(const std::string& name, std::span<const float> ref,
               std::span<const float> got, uint32_t cols) {
    if (ref.size() != got.size()) {
      fail(name + " shape mismatch", 1.0);
      return;
    }
    double scale = 0;
    for (float x : ref) scale = std::max(scale, std::fabs(double{x}));
    scale = std::max(scale, 1e-12);
    double worst = 0;
    std::size_t at = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      double d = std::fabs(double{got[i]} - double{ref[i]});
      if (!(d <= worst)) {
        worst = std::isnan(d) ? INFINITY : d;
        at = i;
      }
    }
    const double dev = worst / scale;
    if (dev > max_dev_) max_dev_ = dev;
    if (dev > tol_ && v_.divergence.empty()) {
      const std::size_t c = cols == 0 ? 1 : cols;
      v_.divergence = name + " row " + std::to_string(at / c) + " col " +
                      std::to_string(at % c) + " deviation " +
                      std::to_string(dev);
    }
  }
  void compare(const std::string& name, const Matrix& ref, const Matrix& got) {
    if (ref.rows != got.rows || ref.cols != got.cols) {
      fail(name + " shape mismatch", 1.0);
      return;
    }
    compare(name, std::span<const float>(ref.data),
            std::span<const float>(got.data), ref.cols);
  }
  void compare_params(const std::string& prefix, const LayerParams& ref,
                      const LayerParams& got) {
    compare(prefix + ".w", ref.w, got.w);
    compare(prefix + ".w2", ref.w2, got.w2);
    compare(prefix + ".b1", std::span<const float>(ref.b1),
            std::span<const float>(got.b1), 0);
    compare(prefix + ".b2", std::span<const float>(ref.b2),
            std::span<const float>(got.b2), 0);
  }
  void scalar(const std::string& name, double ref, double got) {
    double dev = std::fabs(got - ref) / std::max(std::fabs(ref), 1e-12);
    if (std::isnan(dev)) dev = INFINITY;
    if (dev > max_dev_) max_dev_ = dev;
    if (dev > tol_ && v_.divergence.empty()) {
      v_.divergence = name + " deviation " + std::to_string(dev);
    }
  }
  Validation result() {
    v_.max_deviation = max_dev_;
    v_.pass = v_.divergence.empty();
    return v_;
  }

 private:
  void fail(const std::string& what, double dev) {
    max_dev_ = std::max(max_dev_, dev);
    if (v_.divergence.empty()) v_.divergence = what;
  }

  double tol_;
  double max_dev_ = 0;
  Validation v_;
};

}  // namespace

Validation validate_against_reference(const SimInputs& in,
                                      const SimResult& r) {
  if (in.graph == nullptr) throw ParamError("no graph");
  if (r.h.empty()) throw StateError("result carries no functional outputs");
  const ModelConfig& cfg = in.model;
  const uint32_t L = cfg.num_layers();
  TrainerState s = in.state;
  FeatureStore fs =
      train_epoch_reference(*in.graph, cfg, s, in.features, in.labels);
  Checker ck(tolerance_for(cfg.precision));
  for (uint32_t l = 1; l <= L; ++l) {
    ck.compare("h[" + std::to_string(l) + "]", fs.h[l], r.h[l]);
  }
  ck.scalar("loss", s.loss, r.loss);
  for (uint32_t l = 1; l < L; ++l) {
    ck.compare("grad_h[" + std::to_string(l) + "]", fs.grad_h[l], r.grad_h[l]);
  }
  for (uint32_t l = 0; l < L; ++l) {
    ck.compare_params("grad[" + std::to_string(l) + "]", s.grads[l],
                      r.grads[l]);
  }
  sgd_step(s, cfg.learning_rate);
  for (uint32_t l = 0; l < L; ++l) {
    ck.compare_params("weights[" + std::to_string(l) + "]", s.weights[l],
                      r.updated.weights[l]);
  }
  return ck.result();
}

SimReport make_report(const SimInputs& in, const SimOptions& opt,
                      const SimResult& r, const Validation* v) {
  SimReport rep;
  rep.workload = workload_fingerprint(in);
  rep.config = describe(opt);
  rep.num_dimms = opt.shape.num_dimms();
  rep.counters = r.counters;
  rep.loss = r.loss;
  finalize_energy(rep, opt.energy);
  const Counters& c = r.counters;
  const uint64_t ceb =
      opt.count_as_fp32 ? 4 : element_bytes(in.model.precision);
  uint64_t reduce_macs = 0;
  uint64_t update_bytes = 0;
  for (const LayerCounters& lc : c.layers) {
    reduce_macs += lc.reduce_source_bytes / ceb;
    update_bytes += lc.update_stream_bytes;
  }
  const uint64_t reduce_ops = 2 * reduce_macs;
  const uint64_t reduce_bytes =
      opt.toggles.nmp ? c.local_read_bytes : c.reduce_off_chip_bytes();
  auto ratio = [](uint64_t ops, uint64_t bytes) {
    return bytes == 0 ? 0.0 : static_cast<double>(ops) / bytes;
  };
  rep.roofline.push_back(roofline_point(
      "reduce", ratio(reduce_ops, reduce_bytes),
      opt.nme.peak_flops() * opt.shape.num_dimms(),
      nmp_bandwidth(opt.shape, opt.timing)));
  rep.roofline.push_back(roofline_point(
      "update", ratio(c.gemm_flops, update_bytes), opt.cae.quoted_peak_flops,
      channel_bandwidth(opt.shape, opt.timing)));
  if (v != nullptr) {
    rep.verdict = v->pass ? "PASS" : "FAIL";
    rep.max_deviation = v->max_deviation;
    rep.divergence = v->divergence;
  }
  return rep;
}

}  // namespace gnnear
