#include "gnnear/graph.h"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include "gnnear/binio.h"
#include "gnnear/common.h"

namespace gnnear {

namespace {

constexpr uint32_t kCsrVersion = 1;

constexpr std::array<GraphPreset, 4> kPresets = {{
    {"PT", 132534, 39561252, 128, 597.0, 0.0},
    {"RD", 232965, 114615892, 602, 492.9, 0.0},
    {"YP", 716847, 6977410, 300, 19.5, 0.35},
    {"AM", 2449029, 123718280, 100, 101.0, 0.35},
}};

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f';
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

bool is_symmetric(const CsrGraph& g) {
  for (uint32_t v = 0; v < g.num_vertices; ++v) {
    for (uint32_t u : g.neighbors(v)) {
      if (!g.has_edge(v, u)) return false;
    }
  }
  return true;
}

}  // namespace

bool CsrGraph::has_edge(uint32_t u, uint32_t v) const {
  auto n = neighbors(v);
  return std::binary_search(n.begin(), n.end(), u);
}

CsrGraph CsrGraph::transposed() const {
  std::vector<Edge> edges;
  edges.reserve(col_idx.size());
  for (uint32_t v = 0; v < num_vertices; ++v) {
    for (uint32_t u : neighbors(v)) edges.emplace_back(v, u);
  }
  return from_edges(num_vertices, std::move(edges), symmetric);
}

void CsrGraph::validate() const {
  if (row_ptr.size() != static_cast<std::size_t>(num_vertices) + 1) {
    throw InputError("row_ptr length mismatch");
  }
  if (row_ptr.front() != 0 || row_ptr.back() != col_idx.size()) {
    throw InputError("row_ptr endpoints inconsistent with col_idx");
  }
  for (uint32_t v = 0; v < num_vertices; ++v) {
    if (row_ptr[v + 1] < row_ptr[v]) throw InputError("row_ptr decreasing");
    auto n = neighbors(v);
    for (std::size_t i = 0; i < n.size(); ++i) {
      if (n[i] >= num_vertices) throw InputError("col_idx out of range");
      if (n[i] == v) throw InputError("explicit self-loop stored");
      if (i > 0 && n[i] <= n[i - 1]) throw InputError("row not sorted/unique");
    }
  }
  if (symmetric && !is_symmetric(*this)) {
    throw InputError("graph flagged symmetric but adjacency is not");
  }
}

DegreeTable degree_table(const CsrGraph& g) {
  DegreeTable t;
  t.degree.resize(g.num_vertices);
  t.degree_tilde.resize(g.num_vertices);
  for (uint32_t v = 0; v < g.num_vertices; ++v) {
    t.degree[v] = g.degree(v);
    t.degree_tilde[v] = g.degree(v) + 1;
  }
  return t;
}

CsrGraph from_edges(uint32_t num_vertices, std::vector<Edge> edges,
                    bool symmetric) {
  if (symmetric) {
    std::size_t n = edges.size();
    edges.reserve(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      edges.emplace_back(edges[i].second, edges[i].first);
    }
  }
  for (const auto& [u, v] : edges) {
    if (u >= num_vertices || v >= num_vertices) {
      throw InputError("edge endpoint exceeds vertex count");
    }
  }
  std::erase_if(edges, [](const Edge& e) { return e.first == e.second; });
  // Sort by destination row, then source.
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return a.second != b.second ? a.second < b.second : a.first < b.first;
  });
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  CsrGraph g;
  g.num_vertices = num_vertices;
  g.symmetric = symmetric;
  g.row_ptr.assign(static_cast<std::size_t>(num_vertices) + 1, 0);
  g.col_idx.resize(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    g.row_ptr[edges[i].second + 1]++;
    g.col_idx[i] = edges[i].first;
  }
  for (uint32_t v = 0; v < num_vertices; ++v) g.row_ptr[v + 1] += g.row_ptr[v];
  return g;
}

CsrGraph load_edge_list(std::istream& in, bool symmetric) {
  constexpr uint64_t kMaxVertex = std::numeric_limits<uint32_t>::max() - 1;
  std::vector<Edge> edges;
  uint64_t max_vertex = 0;
  bool any = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    uint64_t ids[2];
    const char* p = s.data();
    const char* end = s.data() + s.size();
    for (int k = 0; k < 2; ++k) {
      while (p < end && is_space(*p)) ++p;
      auto [next, ec] = std::from_chars(p, end, ids[k]);
      if (ec == std::errc::result_out_of_range) {
        throw InputError("line " + std::to_string(line_no) +
                         ": vertex index overflow");
      }
      if (ec != std::errc() || next == p) {
        throw ParseError(line_no, "expected two vertex indices");
      }
      p = next;
    }
    while (p < end && is_space(*p)) ++p;
    if (p != end) throw ParseError(line_no, "trailing characters");
    if (ids[0] > kMaxVertex || ids[1] > kMaxVertex) {
      throw InputError("line " + std::to_string(line_no) +
                       ": vertex index overflow");
    }
    max_vertex = std::max({max_vertex, ids[0], ids[1]});
    any = true;
    edges.emplace_back(static_cast<uint32_t>(ids[0]),
                       static_cast<uint32_t>(ids[1]));
  }
  uint32_t n = any ? static_cast<uint32_t>(max_vertex + 1) : 0;
  return from_edges(n, std::move(edges), symmetric);
}

void save_edge_list(std::ostream& out, const CsrGraph& g) {
  out << "# vertices " << g.num_vertices << "\n";
  for (uint32_t v = 0; v < g.num_vertices; ++v) {
    for (uint32_t u : g.neighbors(v)) {
      if (g.symmetric && u > v) continue;
      out << u << ' ' << v << '\n';
    }
  }
}

void write_csr(std::ostream& out, const CsrGraph& g) {
  binio::put_magic(out, "GNRC");
  binio::put<uint32_t>(out, kCsrVersion);
  binio::put<uint64_t>(out, g.num_vertices);
  binio::put<uint64_t>(out, g.num_edges());
  for (uint64_t r : g.row_ptr) binio::put<uint64_t>(out, r);
  for (uint32_t c : g.col_idx) binio::put<uint32_t>(out, c);
}

CsrGraph read_csr(std::istream& in) {
  binio::expect_magic(in, "GNRC");
  if (binio::get<uint32_t>(in) != kCsrVersion) {
    throw InputError("unsupported CSR version");
  }
  uint64_t n = binio::get<uint64_t>(in);
  uint64_t m = binio::get<uint64_t>(in);
  if (n > std::numeric_limits<uint32_t>::max()) {
    throw InputError("vertex count overflow");
  }
  CsrGraph g;
  g.num_vertices = static_cast<uint32_t>(n);
  g.row_ptr.resize(n + 1);
  for (auto& r : g.row_ptr) r = binio::get<uint64_t>(in);
  g.col_idx.resize(m);
  for (auto& c : g.col_idx) c = binio::get<uint32_t>(in);
  // The header carries no direction flag; symmetry is recovered from the
  // adjacency itself.
  g.symmetric = false;
  g.validate();
  g.symmetric = is_symmetric(g);
  return g;
}

double gcn_edge_weight(const CsrGraph& g, uint32_t u, uint32_t v) {
  if (u >= g.num_vertices || v >= g.num_vertices || !g.in_closed(u, v)) {
    throw DomainError("vertex " + std::to_string(u) +
                      " is not in the closed neighborhood of " +
                      std::to_string(v));
  }
  return 1.0 / std::sqrt(static_cast<double>(g.degree_tilde(u)) *
                         static_cast<double>(g.degree_tilde(v)));
}

CsrGraph generate_power_law(uint32_t n, double avg_degree, uint64_t seed) {
  if (n < 1) throw ParamError("power-law generator needs n >= 1");
  if (!(avg_degree >= 0.0)) throw ParamError("avg_degree must be >= 0");
  if (avg_degree >= static_cast<double>(n)) {
    throw ParamError("avg_degree must be below the vertex count");
  }
  Rng rng(seed);
  const auto target =
      static_cast<uint64_t>(std::floor(static_cast<double>(n) * avg_degree / 2));
  std::vector<Edge> edges;
  edges.reserve(target);
  // Endpoint pool: drawing from it picks a vertex with probability
  // proportional to its degree.
  std::vector<uint32_t> pool;
  pool.reserve(2 * target);
  std::vector<uint32_t> stamp(n, std::numeric_limits<uint32_t>::max());
  std::vector<uint32_t> picked;
  uint64_t assigned = 0;
  for (uint32_t v = 1; v < n && assigned < target; ++v) {
    // Spread the remaining quota over the remaining vertices.
    uint64_t left = n - v;
    uint64_t quota = ceil_div(target - assigned, left);
    uint64_t k = std::min<uint64_t>(quota, v);
    picked.clear();
    if (k == v) {
      for (uint32_t u = 0; u < v; ++u) picked.push_back(u);
    } else {
      while (picked.size() < k) {
        // Attachment weight is degree + 1.
        uint64_t r = rng.below(pool.size() + v);
        uint32_t u = r < v ? static_cast<uint32_t>(r) : pool[r - v];
        if (stamp[u] == v) continue;
        stamp[u] = v;
        picked.push_back(u);
      }
    }
    for (uint32_t u : picked) {
      edges.emplace_back(u, v);
      pool.push_back(u);
      pool.push_back(v);
    }
    assigned += picked.size();
  }
  return from_edges(n, std::move(edges), true);
}

std::vector<uint64_t> degree_histogram(
    const CsrGraph& g, const std::vector<uint32_t>& thresholds) {
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw ParamError("histogram thresholds must be ascending");
  }
  std::vector<uint64_t> counts(thresholds.size() + 1, 0);
  for (uint32_t v = 0; v < g.num_vertices; ++v) {
    auto it = std::lower_bound(thresholds.begin(), thresholds.end(),
                               g.degree(v));
    counts[static_cast<std::size_t>(it - thresholds.begin())]++;
  }
  return counts;
}

std::span<const GraphPreset> graph_presets() { return kPresets; }

std::optional<GraphPreset> find_preset(std::string_view name) {
  for (const auto& p : kPresets) {
    if (p.name == name) return p;
  }
  return std::nullopt;
}

}  // namespace gnnear
