#ifndef GNNEAR_GRAPH_H_
#define GNNEAR_GRAPH_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gnnear {

// Row v lists N(v), the sources aggregated into v. Self-loops are never
// stored; every reduction over the closed neighborhood adds v itself.
struct CsrGraph {
  uint32_t num_vertices = 0;
  std::vector<uint64_t> row_ptr{0};
  std::vector<uint32_t> col_idx;
  bool symmetric = true;

  uint64_t num_edges() const { return col_idx.size(); }
  uint32_t degree(uint32_t v) const {
    return static_cast<uint32_t>(row_ptr[v + 1] - row_ptr[v]);
  }
  uint32_t degree_tilde(uint32_t v) const { return degree(v) + 1; }
  std::span<const uint32_t> neighbors(uint32_t v) const {
    return {col_idx.data() + row_ptr[v], col_idx.data() + row_ptr[v + 1]};
  }
  bool has_edge(uint32_t u, uint32_t v) const;
  // u is in the closed neighborhood of v.
  bool in_closed(uint32_t u, uint32_t v) const {
    return u == v || has_edge(u, v);
  }
  // Sum over v of |closed neighborhood|.
  uint64_t closed_edge_count() const { return num_edges() + num_vertices; }

  CsrGraph transposed() const;
  // Throws InputError when a structural invariant is broken.
  void validate() const;

  bool operator==(const CsrGraph&) const = default;
};

struct DegreeTable {
  std::vector<uint32_t> degree;
  std::vector<uint32_t> degree_tilde;
};

DegreeTable degree_table(const CsrGraph& g);

using Edge = std::pair<uint32_t, uint32_t>;

// Edge (u, v) places u in N(v). Duplicates and explicit self-loops are
// dropped. num_vertices may exceed the largest index.
CsrGraph from_edges(uint32_t num_vertices, std::vector<Edge> edges,
                    bool symmetric);

CsrGraph load_edge_list(std::istream& in, bool symmetric = true);
void save_edge_list(std::ostream& out, const CsrGraph& g);

void write_csr(std::ostream& out, const CsrGraph& g);
CsrGraph read_csr(std::istream& in);

double gcn_edge_weight(const CsrGraph& g, uint32_t u, uint32_t v);

CsrGraph generate_power_law(uint32_t n, double avg_degree, uint64_t seed);

// Bucket j counts degrees in (thresholds[j-1], thresholds[j]]; the last
// bucket counts degrees above every threshold.
std::vector<uint64_t> degree_histogram(const CsrGraph& g,
                                       const std::vector<uint32_t>& thresholds);

struct GraphPreset {
  std::string_view name;
  uint64_t num_vertices;
  uint64_t num_edges;
  uint32_t feature_dim;
  double avg_degree;
  double lambda;
};

std::span<const GraphPreset> graph_presets();
std::optional<GraphPreset> find_preset(std::string_view name);

}  // namespace gnnear

#endif  // GNNEAR_GRAPH_H_
