#include "gnnear/model.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "gnnear/binio.h"
#include "gnnear/common.h"
#include "gnnear/partition.h"

namespace gnnear {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kGcn: return "GCN";
    case Variant::kGin: return "GIN";
    case Variant::kSage: return "SAGEConv";
    case Variant::kGat: return "GAT";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  std::string up;
  for (char c : name) up.push_back(static_cast<char>(std::toupper(c)));
  if (up == "GCN") return Variant::kGcn;
  if (up == "GIN") return Variant::kGin;
  if (up == "SAGECONV" || up == "SAGE") return Variant::kSage;
  if (up == "GAT") return Variant::kGat;
  throw ParamError("unknown GNN variant '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  if (dims.empty()) throw ConfigError("model needs at least one layer");
  for (std::size_t l = 0; l < dims.size(); ++l) {
    if (dims[l].d_in == 0 || dims[l].d_out == 0) {
      throw ConfigError("layer widths must be positive");
    }
    if (l + 1 < dims.size() && dims[l].d_out != dims[l + 1].d_in) {
      throw ConfigError("layer " + std::to_string(l) +
                        " output width does not feed layer " +
                        std::to_string(l + 1));
    }
  }
  if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be >= 0");
}

ModelConfig make_model(Variant v, std::vector<uint32_t> widths, Precision p) {
  ModelConfig cfg;
  cfg.variant = v;
  cfg.precision = p;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    cfg.dims.push_back({widths[i], widths[i + 1]});
  }
  cfg.validate();
  return cfg;
}

namespace {

Matrix uniform_matrix(uint32_t r, uint32_t c, double bound, Rng& rng) {
  Matrix m(r, c);
  for (float& x : m.data) x = static_cast<float>(rng.uniform(-bound, bound));
  return m;
}

Matrix zeros_like(const Matrix& m) { return Matrix(m.rows, m.cols); }

LayerParams zeros_like(const LayerParams& p) {
  LayerParams z;
  z.w = zeros_like(p.w);
  z.w2 = zeros_like(p.w2);
  z.b1.assign(p.b1.size(), 0.0f);
  z.b2.assign(p.b2.size(), 0.0f);
  z.att_w1 = zeros_like(p.att_w1);
  z.att_w2 = zeros_like(p.att_w2);
  z.att_a.assign(p.att_a.size(), 0.0f);
  return z;
}

// C = A * B with double accumulation.
Matrix matmul(const Matrix& a, const Matrix& b, Precision p) {
  Matrix c(a.rows, b.cols);
  std::vector<double> acc(b.cols);
  for (uint32_t i = 0; i < a.rows; ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (uint32_t k = 0; k < a.cols; ++k) {
      double x = a.at(i, k);
      if (x == 0.0) continue;
      auto br = b.row(k);
      for (uint32_t j = 0; j < b.cols; ++j) acc[j] += x * br[j];
    }
    for (uint32_t j = 0; j < b.cols; ++j) c.at(i, j) = round_store(acc[j], p);
  }
  return c;
}

// C = A * B^T.
Matrix matmul_bt(const Matrix& a, const Matrix& b, Precision p) {
  Matrix c(a.rows, b.rows);
  for (uint32_t i = 0; i < a.rows; ++i) {
    auto ar = a.row(i);
    for (uint32_t j = 0; j < b.rows; ++j) {
      auto br = b.row(j);
      double acc = 0.0;
      for (uint32_t k = 0; k < a.cols; ++k) acc += double{ar[k]} * br[k];
      c.at(i, j) = round_store(acc, p);
    }
  }
  return c;
}

// G += A^T * B, accumulated in double.
void accumulate_atb(Matrix& g, const Matrix& a, const Matrix& b) {
  std::vector<double> acc(std::size_t{a.cols} * b.cols, 0.0);
  for (uint32_t r = 0; r < a.rows; ++r) {
    auto ar = a.row(r);
    auto br = b.row(r);
    for (uint32_t i = 0; i < a.cols; ++i) {
      double x = ar[i];
      if (x == 0.0) continue;
      double* dst = acc.data() + std::size_t{i} * b.cols;
      for (uint32_t j = 0; j < b.cols; ++j) dst[j] += x * br[j];
    }
  }
  for (std::size_t i = 0; i < acc.size(); ++i) {
    g.data[i] = static_cast<float>(g.data[i] + acc[i]);
  }
}

void accumulate_colsum(std::vector<float>& g, const Matrix& b) {
  std::vector<double> acc(b.cols, 0.0);
  for (uint32_t r = 0; r < b.rows; ++r) {
    for (uint32_t j = 0; j < b.cols; ++j) acc[j] += b.at(r, j);
  }
  for (uint32_t j = 0; j < b.cols; ++j) {
    g[j] = static_cast<float>(g[j] + acc[j]);
  }
}

double leaky(double x, double slope) { return x > 0 ? x : slope * x; }

std::vector<double> attention_projection(const Matrix& w,
                                         std::span<const float> a) {
  std::vector<double> q(w.rows, 0.0);
  for (uint32_t i = 0; i < w.rows; ++i) {
    for (uint32_t j = 0; j < w.cols; ++j) q[i] += double{w.at(i, j)} * a[j];
  }
  return q;
}

}  // namespace

TrainerState init_state(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  TrainerState s;
  for (const auto& d : cfg.dims) {
    LayerParams p;
    double bound_in = 1.0 / std::sqrt(static_cast<double>(d.d_in));
    double bound_out = 1.0 / std::sqrt(static_cast<double>(d.d_out));
    p.w = uniform_matrix(d.d_in, d.d_out, bound_in, rng);
    if (cfg.variant == Variant::kGin) {
      p.w2 = uniform_matrix(d.d_out, d.d_out, bound_out, rng);
      p.b1.assign(d.d_out, 0.0f);
      p.b2.assign(d.d_out, 0.0f);
    }
    if (cfg.variant == Variant::kGat) {
      p.att_w1 = uniform_matrix(d.d_in, d.d_out, bound_in, rng);
      p.att_w2 = uniform_matrix(d.d_in, d.d_out, bound_in, rng);
      Matrix a = uniform_matrix(1, 2 * d.d_out, bound_out, rng);
      p.att_a = a.data;
    }
    s.grads.push_back(zeros_like(p));
    s.weights.push_back(std::move(p));
  }
  return s;
}

void zero_grads(TrainerState& s) {
  for (std::size_t l = 0; l < s.weights.size(); ++l) {
    s.grads[l] = zeros_like(s.weights[l]);
  }
}

void sgd_step(TrainerState& s, double lr) {
  auto step = [lr](std::vector<float>& w, const std::vector<float>& g) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = static_cast<float>(w[i] - lr * g[i]);
    }
  };
  for (std::size_t l = 0; l < s.weights.size(); ++l) {
    LayerParams& w = s.weights[l];
    const LayerParams& g = s.grads[l];
    step(w.w.data, g.w.data);
    step(w.w2.data, g.w2.data);
    step(w.b1, g.b1);
    step(w.b2, g.b2);
    step(w.att_w1.data, g.att_w1.data);
    step(w.att_w2.data, g.att_w2.data);
    step(w.att_a, g.att_a);
  }
  zero_grads(s);
}

EdgeWeights forward_edge_weights(const CsrGraph& g, const ModelConfig& cfg,
                                 const LayerParams& p, const Matrix& h) {
  EdgeWeights w;
  w.self_w.resize(g.num_vertices);
  w.nbr_w.resize(g.num_edges());
  const Precision prec = cfg.precision;
  switch (cfg.variant) {
    case Variant::kGcn:
      for (uint32_t v = 0; v < g.num_vertices; ++v) {
        w.self_w[v] = round_store(1.0 / g.degree_tilde(v), prec);
        for (uint64_t e = g.row_ptr[v]; e < g.row_ptr[v + 1]; ++e) {
          w.nbr_w[e] = round_store(gcn_edge_weight(g, g.col_idx[e], v), prec);
        }
      }
      break;
    case Variant::kGin:
      for (uint32_t v = 0; v < g.num_vertices; ++v) {
        w.self_w[v] = round_store(1.0 + cfg.gin_eps, prec);
        for (uint64_t e = g.row_ptr[v]; e < g.row_ptr[v + 1]; ++e) {
          w.nbr_w[e] = 1.0;
        }
      }
      break;
    case Variant::kSage:
      for (uint32_t v = 0; v < g.num_vertices; ++v) {
        double m = round_store(1.0 / g.degree_tilde(v), prec);
        w.self_w[v] = m;
        for (uint64_t e = g.row_ptr[v]; e < g.row_ptr[v + 1]; ++e) {
          w.nbr_w[e] = m;
        }
      }
      break;
    case Variant::kGat: {
      const uint32_t d_out = p.att_w1.cols;
      auto q_dst = attention_projection(
          p.att_w1, std::span<const float>(p.att_a).subspan(0, d_out));
      auto q_src = attention_projection(
          p.att_w2, std::span<const float>(p.att_a).subspan(d_out, d_out));
      std::vector<double> s_dst(g.num_vertices), s_src(g.num_vertices);
      for (uint32_t v = 0; v < g.num_vertices; ++v) {
        double a = 0, b = 0;
        auto hv = h.row(v);
        for (uint32_t k = 0; k < h.cols; ++k) {
          a += hv[k] * q_dst[k];
          b += hv[k] * q_src[k];
        }
        s_dst[v] = a;
        s_src[v] = b;
      }
      std::vector<double> score;
      for (uint32_t v = 0; v < g.num_vertices; ++v) {
        auto nb = g.neighbors(v);
        score.resize(nb.size() + 1);
        score[0] = leaky(s_dst[v] + s_src[v], cfg.gat_slope);
        for (std::size_t i = 0; i < nb.size(); ++i) {
          score[i + 1] = leaky(s_dst[v] + s_src[nb[i]], cfg.gat_slope);
        }
        double mx = *std::max_element(score.begin(), score.end());
        double sum = 0;
        for (double& x : score) sum += (x = std::exp(x - mx));
        w.self_w[v] = round_store(score[0] / sum, prec);
        for (std::size_t i = 0; i < nb.size(); ++i) {
          w.nbr_w[g.row_ptr[v] + i] = round_store(score[i + 1] / sum, prec);
        }
      }
      break;
    }
  }
  return w;
}

EdgeWeights transpose_edge_weights(const CsrGraph& g, const CsrGraph& gt,
                                   const EdgeWeights& fwd) {
  EdgeWeights t;
  t.self_w = fwd.self_w;
  t.nbr_w.assign(gt.num_edges(), 0.0);
  for (uint32_t v = 0; v < g.num_vertices; ++v) {
    for (uint64_t e = g.row_ptr[v]; e < g.row_ptr[v + 1]; ++e) {
      uint32_t u = g.col_idx[e];
      auto row = gt.neighbors(u);
      auto it = std::lower_bound(row.begin(), row.end(), v);
      t.nbr_w[gt.row_ptr[u] + static_cast<uint64_t>(it - row.begin())] =
          fwd.nbr_w[e];
    }
  }
  return t;
}

Matrix aggregate(const CsrGraph& g, const EdgeWeights& w, const Matrix& x,
                 Precision p) {
  if (x.rows != g.num_vertices) throw ConfigError("feature rows != vertices");
  Matrix out(x.rows, x.cols);
  std::vector<double> acc(x.cols);
  for (uint32_t v = 0; v < g.num_vertices; ++v) {
    auto xv = x.row(v);
    for (uint32_t k = 0; k < x.cols; ++k) acc[k] = w.self_w[v] * xv[k];
    for (uint64_t e = g.row_ptr[v]; e < g.row_ptr[v + 1]; ++e) {
      auto xu = x.row(g.col_idx[e]);
      double we = w.nbr_w[e];
      for (uint32_t k = 0; k < x.cols; ++k) acc[k] += we * xu[k];
    }
    for (uint32_t k = 0; k < x.cols; ++k) out.at(v, k) = round_store(acc[k], p);
  }
  return out;
}

FeatureStore forward_reference(const CsrGraph& g, const ModelConfig& cfg,
                               const TrainerState& s, const Matrix& x) {
  cfg.validate();
  if (x.rows != g.num_vertices || x.cols != cfg.dims[0].d_in) {
    throw ConfigError("input features must be vertices x first-layer width");
  }
  const Precision p = cfg.precision;
  const uint32_t L = cfg.num_layers();
  FeatureStore fs;
  fs.h.resize(L + 1);
  fs.a.resize(L);
  fs.z.resize(L);
  fs.t.resize(L);
  fs.delta.resize(L);
  fs.delta_p.resize(L);
  fs.grad_h.resize(L + 1);
  fs.edge_w.resize(L);
  fs.h[0] = x;
  for (float& v : fs.h[0].data) v = round_store(v, p);
  for (uint32_t l = 0; l < L; ++l) {
    const LayerParams& w = s.weights[l];
    fs.edge_w[l] = forward_edge_weights(g, cfg, w, fs.h[l]);
    fs.a[l] = aggregate(g, fs.edge_w[l], fs.h[l], p);
    Matrix z = matmul(fs.a[l], w.w, p);
    Matrix h(z.rows, z.cols);
    if (cfg.variant == Variant::kGin) {
      for (uint32_t r = 0; r < z.rows; ++r) {
        for (uint32_t c = 0; c < z.cols; ++c) {
          z.at(r, c) = round_store(double{z.at(r, c)} + w.b1[c], p);
        }
      }
      Matrix t(z.rows, z.cols);
      for (std::size_t i = 0; i < z.data.size(); ++i) {
        t.data[i] = std::max(z.data[i], 0.0f);
      }
      h = matmul(t, w.w2, p);
      for (uint32_t r = 0; r < h.rows; ++r) {
        for (uint32_t c = 0; c < h.cols; ++c) {
          h.at(r, c) = round_store(double{h.at(r, c)} + w.b2[c], p);
        }
      }
      fs.t[l] = std::move(t);
    } else if (cfg.variant == Variant::kGat) {
      for (std::size_t i = 0; i < z.data.size(); ++i) {
        double v = z.data[i];
        h.data[i] = round_store(v > 0 ? v : std::expm1(v), p);
      }
    } else {
      for (std::size_t i = 0; i < z.data.size(); ++i) {
        h.data[i] = std::max(z.data[i], 0.0f);
      }
    }
    fs.z[l] = std::move(z);
    fs.h[l + 1] = std::move(h);
  }
  return fs;
}

double softmax_xent(const Matrix& logits, std::span<const uint32_t> labels,
                    Matrix* grad, Precision p) {
  if (labels.size() != logits.rows) {
    throw ConfigError("label count must equal vertex count");
  }
  if (grad) *grad = Matrix(logits.rows, logits.cols);
  double total = 0.0;
  const double inv_n = logits.rows ? 1.0 / logits.rows : 0.0;
  std::vector<double> e(logits.cols);
  for (uint32_t r = 0; r < logits.rows; ++r) {
    if (labels[r] >= logits.cols) throw ConfigError("label out of range");
    auto x = logits.row(r);
    double mx = *std::max_element(x.begin(), x.end());
    double sum = 0.0;
    for (uint32_t c = 0; c < logits.cols; ++c) sum += (e[c] = std::exp(x[c] - mx));
    total += std::log(sum) - (x[labels[r]] - mx);
    if (grad) {
      for (uint32_t c = 0; c < logits.cols; ++c) {
        double g = e[c] / sum - (c == labels[r] ? 1.0 : 0.0);
        grad->at(r, c) = round_store(g * inv_n, p);
      }
    }
  }
  return total * inv_n;
}

void backward_reference(const CsrGraph& g, const ModelConfig& cfg,
                        TrainerState& s, FeatureStore& fs,
                        const Matrix& output_grad) {
  const Precision p = cfg.precision;
  const uint32_t L = cfg.num_layers();
  if (fs.a.size() != L || fs.h.size() != L + 1) {
    throw StateError("forward activations were not retained");
  }
  for (uint32_t l = 0; l < L; ++l) {
    if (fs.a[l].empty()) throw StateError("missing retained aggregation");
  }
  if (output_grad.rows != g.num_vertices ||
      output_grad.cols != cfg.dims.back().d_out) {
    throw ConfigError("output gradient shape mismatch");
  }
  CsrGraph gt_storage;
  const CsrGraph* gt = &g;
  if (!g.symmetric) {
    gt_storage = g.transposed();
    gt = &gt_storage;
  }
  Matrix grad = output_grad;
  fs.grad_h[L] = grad;
  for (uint32_t li = L; li-- > 0;) {
    const LayerParams& w = s.weights[li];
    LayerParams& gw = s.grads[li];
    Matrix dp(grad.rows, grad.cols);
    if (cfg.variant == Variant::kGin) {
      accumulate_atb(gw.w2, fs.t[li], grad);
      accumulate_colsum(gw.b2, grad);
      Matrix dt = matmul_bt(grad, w.w2, p);
      for (std::size_t i = 0; i < dt.data.size(); ++i) {
        dp.data[i] = fs.z[li].data[i] > 0 ? dt.data[i] : 0.0f;
      }
      accumulate_colsum(gw.b1, dp);
    } else {
      for (std::size_t i = 0; i < grad.data.size(); ++i) {
        double z = fs.z[li].data[i];
        double m = z > 0 ? 1.0
                         : (cfg.variant == Variant::kGat ? std::exp(z) : 0.0);
        dp.data[i] = round_store(grad.data[i] * m, p);
      }
    }
    accumulate_atb(gw.w, fs.a[li], dp);
    fs.delta[li] = matmul_bt(dp, w.w, p);
    fs.delta_p[li] = std::move(dp);
    if (li > 0) {
      EdgeWeights wt = transpose_edge_weights(g, *gt, fs.edge_w[li]);
      grad = aggregate(*gt, wt, fs.delta[li], p);
      fs.grad_h[li] = grad;
    }
  }
}

FeatureStore train_epoch_reference(const CsrGraph& g, const ModelConfig& cfg,
                                   TrainerState& s, const Matrix& x,
                                   std::span<const uint32_t> labels) {
  zero_grads(s);
  FeatureStore fs = forward_reference(g, cfg, s, x);
  Matrix out_grad;
  s.loss = softmax_xent(fs.h.back(), labels, &out_grad, cfg.precision);
  backward_reference(g, cfg, s, fs, out_grad);
  return fs;
}

Matrix random_features(uint32_t n, uint32_t d, uint64_t seed) {
  Rng rng(seed);
  return uniform_matrix(n, d, 1.0, rng);
}

std::vector<uint32_t> random_labels(uint32_t n, uint32_t classes,
                                    uint64_t seed) {
  Rng rng(seed);
  std::vector<uint32_t> out(n);
  for (auto& l : out) l = static_cast<uint32_t>(rng.below(classes));
  return out;
}

void write_matrix(std::ostream& out, const Matrix& m, ElementCode code) {
  binio::put<uint64_t>(out, m.rows);
  binio::put<uint64_t>(out, m.cols);
  binio::put<uint32_t>(out, static_cast<uint32_t>(code));
  for (float x : m.data) {
    switch (code) {
      case ElementCode::kF32:
        binio::put<uint32_t>(out, std::bit_cast<uint32_t>(x));
        break;
      case ElementCode::kBf16:
        binio::put<uint16_t>(out, float_to_bf16(x));
        break;
      case ElementCode::kU32:
        binio::put<uint32_t>(out, static_cast<uint32_t>(x));
        break;
    }
  }
}

Matrix read_matrix(std::istream& in) {
  uint64_t rows = binio::get<uint64_t>(in);
  uint64_t cols = binio::get<uint64_t>(in);
  auto code = static_cast<ElementCode>(binio::get<uint32_t>(in));
  if (rows > UINT32_MAX || cols > UINT32_MAX) {
    throw InputError("matrix dimensions overflow");
  }
  Matrix m(static_cast<uint32_t>(rows), static_cast<uint32_t>(cols));
  for (float& x : m.data) {
    switch (code) {
      case ElementCode::kF32:
        x = std::bit_cast<float>(binio::get<uint32_t>(in));
        break;
      case ElementCode::kBf16:
        x = bf16_to_float(binio::get<uint16_t>(in));
        break;
      case ElementCode::kU32:
        x = static_cast<float>(binio::get<uint32_t>(in));
        break;
      default:
        throw InputError("unknown matrix element code");
    }
  }
  return m;
}

void write_labels(std::ostream& out, std::span<const uint32_t> labels) {
  binio::put<uint64_t>(out, labels.size());
  binio::put<uint64_t>(out, 1);
  binio::put<uint32_t>(out, static_cast<uint32_t>(ElementCode::kU32));
  for (uint32_t l : labels) binio::put<uint32_t>(out, l);
}

std::vector<uint32_t> read_labels(std::istream& in) {
  uint64_t rows = binio::get<uint64_t>(in);
  uint64_t cols = binio::get<uint64_t>(in);
  if (binio::get<uint32_t>(in) != static_cast<uint32_t>(ElementCode::kU32) ||
      cols != 1) {
    throw InputError("labels must be a single u32 column");
  }
  std::vector<uint32_t> out(rows);
  for (auto& l : out) l = binio::get<uint32_t>(in);
  return out;
}

// ---- Epoch program --------------------------------------------------------

bool ieo_applies(const ModelConfig& cfg, uint32_t layer, bool ieo) {
  return ieo && cfg.linear_aggregator() &&
         cfg.dims[layer].d_in > cfg.dims[layer].d_out;
}

std::vector<EpochOp> plan_epoch(const ModelConfig& cfg, bool ieo) {
  cfg.validate();
  if (ieo && !cfg.linear_aggregator()) {
    throw ConfigError(
        "interchanged execution order needs a linear aggregator; " +
        std::string(variant_name(cfg.variant)) +
        " attention weights depend on the aggregated features");
  }
  const uint32_t L = cfg.num_layers();
  std::vector<EpochOp> ops;
  for (uint32_t l = 0; l < L; ++l) {
    const auto& d = cfg.dims[l];
    if (ieo_applies(cfg, l, ieo)) {
      ops.push_back({OpKind::kProject, l, Direction::kForward});
      ops.push_back({OpKind::kAggregate, l, Direction::kForward, d.d_out});
      ops.push_back({OpKind::kActivateFwd, l, Direction::kForward});
    } else {
      ops.push_back({OpKind::kAggregate, l, Direction::kForward, d.d_in});
      ops.push_back({OpKind::kUpdateFwd, l, Direction::kForward});
    }
  }
  ops.push_back({OpKind::kLoss, L - 1, Direction::kBackward});
  for (uint32_t l = L; l-- > 0;) {
    const auto& d = cfg.dims[l];
    ops.push_back({OpKind::kHeadBwd, l, Direction::kBackward});
    if (ieo_applies(cfg, l, ieo)) {
      ops.push_back({OpKind::kAggregate, l, Direction::kBackward, d.d_out});
      ops.push_back({OpKind::kUpdateBwdIeo, l, Direction::kBackward});
    } else {
      ops.push_back({OpKind::kUpdateBwd, l, Direction::kBackward});
      if (l > 0) {
        ops.push_back({OpKind::kAggregate, l, Direction::kBackward, d.d_in});
      }
    }
  }
  return ops;
}

namespace {

void append_vertex_op(OpStream& s, const ModelConfig& cfg, const EpochOp& op,
                      VertexRange r) {
  auto update = [&](UpdateKind k) {
    s.steps.push_back(UpdateStep{op.layer, op.dir, k, r});
  };
  auto others = [&](OthersKind k) { s.steps.push_back(OthersStep{k, r}); };
  switch (op.kind) {
    case OpKind::kProject:
    case OpKind::kUpdateFwd:
      update(UpdateKind::kVecMat);
      if (cfg.variant == Variant::kGin && op.kind == OpKind::kUpdateFwd) {
        update(UpdateKind::kVecMat);
      }
      break;
    case OpKind::kActivateFwd:
      if (cfg.variant == Variant::kGin) update(UpdateKind::kVecMat);
      others(OthersKind::kActivation);
      break;
    case OpKind::kLoss:
      others(OthersKind::kLoss);
      break;
    case OpKind::kHeadBwd:
      others(OthersKind::kActivation);
      break;
    case OpKind::kUpdateBwd:
    case OpKind::kUpdateBwdIeo:
      update(UpdateKind::kOuterProduct);
      if (op.layer > 0) update(UpdateKind::kVecMat);
      break;
    case OpKind::kAggregate:
      break;
  }
}

}  // namespace

OpStream build_op_stream(const CsrGraph& g, const ModelConfig& cfg,
                         const Placement& placement, const ShardConfig& shard,
                         bool ieo) {
  shard.validate();
  if (placement.num_vertices() != g.num_vertices) {
    throw ParamError("placement does not cover every vertex");
  }
  std::vector<EpochOp> ops = plan_epoch(cfg, ieo);
  CsrGraph gt_storage;
  const CsrGraph* gt = &g;
  if (!g.symmetric) {
    gt_storage = g.transposed();
    gt = &gt_storage;
  }
  const uint32_t n = g.num_vertices;
  const uint32_t intervals = static_cast<uint32_t>(ceil_div(n, shard.C));
  OpStream s;
  std::size_t i = 0;
  // Vertex-wise operations ahead of the first aggregation cover all
  // vertices at once.
  for (; i < ops.size() && ops[i].kind != OpKind::kAggregate; ++i) {
    append_vertex_op(s, cfg, ops[i], {0, n});
  }
  while (i < ops.size()) {
    const EpochOp agg = ops[i++];
    std::size_t tail_end = i;
    while (tail_end < ops.size() && ops[tail_end].kind != OpKind::kAggregate) {
      ++tail_end;
    }
    const CsrGraph& rg = agg.dir == Direction::kForward ? g : *gt;
    for (uint32_t k = 0; k < intervals; ++k) {
      VertexRange r{k * shard.C, std::min(n, (k + 1) * shard.C)};
      ReduceStep step{agg.layer, agg.dir, k, r, agg.dim, {}};
      for (uint32_t v = r.begin; v < r.end; ++v) {
        step.edges.emplace_back(v, v);
        for (uint32_t u : rg.neighbors(v)) step.edges.emplace_back(u, v);
      }
      s.steps.push_back(std::move(step));
      for (std::size_t j = i; j < tail_end; ++j) {
        append_vertex_op(s, cfg, ops[j], r);
      }
    }
    i = tail_end;
  }
  return s;
}

OpCounts op_counts(const CsrGraph& g, const ModelConfig& cfg) {
  OpCounts c;
  for (uint32_t l = 0; l < cfg.num_layers(); ++l) {
    c.reduce_additions.push_back(g.closed_edge_count());
    c.vec_mat_updates.push_back(g.num_vertices);
    c.outer_products.push_back(g.num_vertices);
  }
  return c;
}

double arithmetic_intensity(IntensityKind kind, uint32_t d_in, uint32_t d_out,
                            double fanin, uint32_t element_bytes) {
  if (d_in == 0 || d_out == 0 || element_bytes == 0) {
    throw ParamError("dimensions must be positive");
  }
  const double di = d_in, dout = d_out, eb = element_bytes;
  switch (kind) {
    case IntensityKind::kVecMat:
      return 2.0 * di * dout / (eb * (di + dout));
    case IntensityKind::kOuterProduct:
      return di * dout / (eb * (di + dout));
    case IntensityKind::kReduce:
      if (!(fanin >= 1.0)) throw ParamError("fanin must be >= 1");
      return 2.0 * fanin * di / (eb * (fanin * di + dout));
  }
  return 0.0;
}

}  // namespace gnnear
