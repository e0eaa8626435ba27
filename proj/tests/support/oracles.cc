#include "support/oracles.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <stdexcept>
#include <tuple>

namespace gnnear::oracle {

Dense to_dense(const Matrix& m) {
  Dense d(m.rows, m.cols);
  for (std::size_t i = 0; i < m.data.size(); ++i) d.v[i] = m.data[i];
  return d;
}

Dense adjacency(const CsrGraph& g, Variant variant, double gin_eps) {
  const uint32_t n = g.num_vertices;
  Dense a(n, n);
  for (uint32_t v = 0; v < n; ++v) {
    const double dv = g.degree(v) + 1.0;
    switch (variant) {
      case Variant::kGcn:
        a.at(v, v) = 1.0 / dv;
        for (uint32_t u : g.neighbors(v)) {
          a.at(v, u) = 1.0 / std::sqrt((g.degree(u) + 1.0) * dv);
        }
        break;
      case Variant::kSage:
        a.at(v, v) = 1.0 / dv;
        for (uint32_t u : g.neighbors(v)) a.at(v, u) = 1.0 / dv;
        break;
      case Variant::kGin:
        a.at(v, v) = 1.0 + gin_eps;
        for (uint32_t u : g.neighbors(v)) a.at(v, u) = 1.0;
        break;
      case Variant::kGat:
        throw std::invalid_argument("attention weights must be supplied");
    }
  }
  return a;
}

Dense adjacency(const CsrGraph& g, const EdgeWeights& w) {
  const uint32_t n = g.num_vertices;
  Dense a(n, n);
  for (uint32_t v = 0; v < n; ++v) {
    a.at(v, v) = w.self_w[v];
    for (uint64_t e = g.row_ptr[v]; e < g.row_ptr[v + 1]; ++e) {
      a.at(v, g.col_idx[e]) = w.nbr_w[e];
    }
  }
  return a;
}

namespace {

Dense matmul(const Dense& a, const Dense& b) {
  Dense c(a.rows, b.cols);
  for (uint32_t i = 0; i < a.rows; ++i) {
    for (uint32_t k = 0; k < a.cols; ++k) {
      const double x = a.at(i, k);
      if (x == 0) continue;
      for (uint32_t j = 0; j < b.cols; ++j) c.at(i, j) += x * b.at(k, j);
    }
  }
  return c;
}

}  // namespace

DenseForward dense_forward(const CsrGraph& g, const ModelConfig& cfg,
                           const TrainerState& s, const Matrix& x,
                           std::span<const uint32_t> labels,
                           const std::vector<Dense>* frozen) {
  DenseForward out;
  out.h.push_back(to_dense(x));
  const uint32_t L = cfg.num_layers();
  Dense fixed;
  if (frozen == nullptr) fixed = adjacency(g, cfg.variant, cfg.gin_eps);
  for (uint32_t l = 0; l < L; ++l) {
    const LayerParams& p = s.weights[l];
    const Dense& adj = frozen != nullptr ? (*frozen)[l] : fixed;
    Dense z = matmul(matmul(adj, out.h[l]), to_dense(p.w));
    Dense h(z.rows, z.cols);
    if (cfg.variant == Variant::kGin) {
      Dense t(z.rows, z.cols);
      for (uint32_t r = 0; r < z.rows; ++r) {
        for (uint32_t c = 0; c < z.cols; ++c) {
          t.at(r, c) = std::max(0.0, z.at(r, c) + p.b1[c]);
        }
      }
      h = matmul(t, to_dense(p.w2));
      for (uint32_t r = 0; r < h.rows; ++r) {
        for (uint32_t c = 0; c < h.cols; ++c) h.at(r, c) += p.b2[c];
      }
    } else if (cfg.variant == Variant::kGat) {
      for (std::size_t i = 0; i < z.v.size(); ++i) {
        h.v[i] = z.v[i] > 0 ? z.v[i] : std::expm1(z.v[i]);
      }
    } else {
      for (std::size_t i = 0; i < z.v.size(); ++i) h.v[i] = std::max(0.0, z.v[i]);
    }
    out.h.push_back(std::move(h));
  }
  const Dense& o = out.h.back();
  double total = 0;
  for (uint32_t r = 0; r < o.rows; ++r) {
    double m = -INFINITY;
    for (uint32_t c = 0; c < o.cols; ++c) m = std::max(m, o.at(r, c));
    double sum = 0;
    for (uint32_t c = 0; c < o.cols; ++c) sum += std::exp(o.at(r, c) - m);
    total += m + std::log(sum) - o.at(r, labels[r]);
  }
  out.loss = o.rows == 0 ? 0.0 : total / o.rows;
  return out;
}

LayerParams finite_difference(const CsrGraph& g, const ModelConfig& cfg,
                              const TrainerState& s, const Matrix& x,
                              std::span<const uint32_t> labels,
                              uint32_t layer, double step,
                              const std::vector<Dense>* frozen) {
  TrainerState work = s;
  LayerParams grad = s.weights[layer];
  auto diff = [&](std::vector<float>& param, std::vector<float>& out) {
    for (std::size_t i = 0; i < param.size(); ++i) {
      const float orig = param[i];
      const float hi = static_cast<float>(orig + step);
      const float lo = static_cast<float>(orig - step);
      param[i] = hi;
      const double fhi = dense_forward(g, cfg, work, x, labels, frozen).loss;
      param[i] = lo;
      const double flo = dense_forward(g, cfg, work, x, labels, frozen).loss;
      param[i] = orig;
      out[i] = static_cast<float>((fhi - flo) / (double{hi} - double{lo}));
    }
  };
  LayerParams& p = work.weights[layer];
  diff(p.w.data, grad.w.data);
  diff(p.w2.data, grad.w2.data);
  diff(p.b1, grad.b1);
  diff(p.b2, grad.b2);
  return grad;
}

double relative_error(std::span<const float> a, std::span<const float> b,
                      double floor) {
  std::vector<double> bd(b.begin(), b.end());
  return relative_error(a, std::span<const double>(bd), floor);
}

double relative_error(std::span<const float> a, std::span<const double> b,
                      double floor) {
  if (a.size() != b.size()) return INFINITY;
  double scale = floor;
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    scale = std::max(scale, std::fabs(b[i]));
    const double d = std::fabs(double{a[i]} - b[i]);
    if (std::isnan(d)) return INFINITY;
    worst = std::max(worst, d);
  }
  return worst / scale;
}

// ---- Command-trace checker ---------------------------------------------------

std::vector<std::string> check_command_trace(
    const std::vector<CommandRecord>& trace, const TimingParams& t,
    uint32_t ranks_per_dimm) {
  constexpr int64_t kLongAgo = -(int64_t{1} << 40);
  struct BankState {
    bool open = false;
    uint32_t row = 0;
    int64_t act = kLongAgo;
    int64_t pre = kLongAgo;
    int64_t data_end = kLongAgo;
  };
  struct RankState {
    std::vector<BankState> banks;
    std::vector<int64_t> acts;  // every ACT, in order
    std::vector<int64_t> act_group;
    std::vector<int64_t> col_group;
    int64_t last_act = kLongAgo;
    int64_t last_col = kLongAgo;
    int64_t bus_end = kLongAgo;
    bool bus_write = false;
  };
  struct DimmState {
    std::vector<RankState> ranks;
    int64_t last_cmd = kLongAgo;
  };
  std::map<std::pair<uint32_t, uint32_t>, DimmState> dimms;
  std::vector<std::string> errors;
  const uint32_t per_group = t.banks_per_rank / t.bank_groups;
  const int64_t ras = int64_t{t.tRC} - t.tRP;

  auto fail = [&](std::size_t i, const CommandRecord& c, const std::string& rule) {
    errors.push_back("command " + std::to_string(i) + " at cycle " +
                     std::to_string(c.cycle) + " (ch " +
                     std::to_string(c.channel) + " dimm " +
                     std::to_string(c.dimm) + " rank " +
                     std::to_string(c.rank) + " bank " +
                     std::to_string(c.bank) + "): " + rule);
  };

  std::vector<std::size_t> order(trace.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return trace[a].cycle < trace[b].cycle;
  });

  for (std::size_t i : order) {
    const CommandRecord& c = trace[i];
    DimmState& d = dimms[{c.channel, c.dimm}];
    if (d.ranks.empty()) {
      d.ranks.resize(ranks_per_dimm);
      for (RankState& r : d.ranks) {
        r.banks.resize(t.banks_per_rank);
        r.act_group.assign(t.bank_groups, kLongAgo);
        r.col_group.assign(t.bank_groups, kLongAgo);
      }
    }
    if (c.rank >= ranks_per_dimm || c.bank >= t.banks_per_rank) {
      fail(i, c, "coordinates out of range");
      continue;
    }
    const auto now = static_cast<int64_t>(c.cycle);
    if (now <= d.last_cmd) fail(i, c, "two commands in one cycle on a DIMM");
    d.last_cmd = now;
    RankState& r = d.ranks[c.rank];
    BankState& b = r.banks[c.bank];
    const uint32_t grp = c.bank / per_group;
    switch (c.cmd) {
      case Command::kAct:
        if (b.open) fail(i, c, "ACT to an open bank");
        if (now - b.act < t.tRC) fail(i, c, "tRC");
        if (now - b.pre < t.tRP) fail(i, c, "tRP");
        if (now - r.act_group[grp] < t.tRRD_L) fail(i, c, "tRRD_L");
        if (now - r.last_act < t.tRRD_S) fail(i, c, "tRRD_S");
        if (r.acts.size() >= 4 && now - r.acts[r.acts.size() - 4] < t.tFAW) {
          fail(i, c, "tFAW");
        }
        b.open = true;
        b.row = c.row;
        b.act = now;
        r.acts.push_back(now);
        r.act_group[grp] = now;
        r.last_act = now;
        break;
      case Command::kPre:
        if (!b.open) fail(i, c, "PRE to a closed bank");
        if (now - b.act < ras) fail(i, c, "ACT to PRE (tRC - tRP)");
        if (now < b.data_end) fail(i, c, "PRE during a data transfer");
        b.open = false;
        b.pre = now;
        break;
      case Command::kRd:
      case Command::kWr: {
        const bool write = c.cmd == Command::kWr;
        if (!b.open || b.row != c.row) fail(i, c, "column command to a closed row");
        if (now - b.act < t.tRCD) fail(i, c, "tRCD");
        if (now - r.col_group[grp] < t.tCCD_L) fail(i, c, "tCCD_L");
        if (now - r.last_col < t.tCCD_S) fail(i, c, "tCCD_S");
        const int64_t start = now + t.tCL;
        int64_t bus_free = r.bus_end;
        if (write != r.bus_write && r.bus_end > kLongAgo) bus_free += t.turnaround;
        if (start < bus_free) fail(i, c, "data bus overlap (tCL/tBL)");
        if (c.bursts == 0) fail(i, c, "column command without bursts");
        const int64_t end = start + int64_t{c.bursts} * t.tBL;
        r.bus_end = end;
        r.bus_write = write;
        r.last_col = now;
        r.col_group[grp] = now;
        b.data_end = std::max(b.data_end, end);
        break;
      }
    }
  }
  return errors;
}

}  // namespace gnnear::oracle
