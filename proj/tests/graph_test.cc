#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "gnnear/common.h"
#include "gnnear/graph.h"
#include "support/fixtures.h"

namespace gnnear {
namespace {

TEST(EdgeList, PathBuildsSortedSymmetricCsr) {
  std::istringstream in("0 1\n1 2");
  CsrGraph g = load_edge_list(in, true);
  EXPECT_EQ(g.num_vertices, 3u);
  EXPECT_EQ(g.col_idx, (std::vector<uint32_t>{1, 0, 2, 1}));
  DegreeTable d = degree_table(g);
  EXPECT_EQ(d.degree, (std::vector<uint32_t>{1, 2, 1}));
  EXPECT_EQ(d.degree_tilde, (std::vector<uint32_t>{2, 3, 2}));
  EXPECT_NO_THROW(g.validate());
}

TEST(EdgeList, EmptyStream) {
  std::istringstream in("");
  CsrGraph g = load_edge_list(in, true);
  EXPECT_EQ(g.num_vertices, 0u);
  EXPECT_EQ(g.row_ptr, std::vector<uint64_t>{0});
}

TEST(EdgeList, DuplicatesCollapse) {
  std::istringstream in("0 1\n0 1");
  CsrGraph g = load_edge_list(in, true);
  EXPECT_EQ(g.degree(0), 1u);
  EXPECT_EQ(g.num_edges(), 2u);
}

TEST(EdgeList, CommentsIgnoredAndDirectedKeepsOrientation) {
  std::istringstream in("# header\n0 1\n# mid\n2 1\n");
  CsrGraph g = load_edge_list(in, false);
  EXPECT_FALSE(g.symmetric);
  // Edge (u, v) places u in N(v).
  EXPECT_EQ(g.degree(1), 2u);
  EXPECT_EQ(g.degree(0), 0u);
  EXPECT_TRUE(g.has_edge(0, 1));
  EXPECT_FALSE(g.has_edge(1, 0));
}

TEST(EdgeList, MalformedLineReportsLineNumber) {
  std::istringstream in("0 1\n1 x\n");
  try {
    load_edge_list(in, true);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(EdgeList, IndexOverflowIsInputError) {
  std::istringstream in("0 99999999999\n");
  EXPECT_THROW(load_edge_list(in, true), InputError);
}

TEST(EdgeList, MultisetOracle) {
  Rng rng(5);
  std::vector<Edge> edges;
  std::set<std::pair<uint32_t, uint32_t>> expected;
  std::ostringstream text;
  for (int i = 0; i < 400; ++i) {
    uint32_t u = static_cast<uint32_t>(rng.below(40));
    uint32_t v = static_cast<uint32_t>(rng.below(40));
    text << u << ' ' << v << '\n';
    if (u != v) {
      expected.insert({u, v});
      expected.insert({v, u});
    }
  }
  std::istringstream in(text.str());
  CsrGraph g = load_edge_list(in, true);
  std::set<std::pair<uint32_t, uint32_t>> got;
  for (uint32_t v = 0; v < g.num_vertices; ++v) {
    for (uint32_t u : g.neighbors(v)) got.insert({u, v});
  }
  EXPECT_EQ(got, expected);
}

TEST(GcnWeight, Examples) {
  CsrGraph single = from_edges(1, {}, true);
  EXPECT_DOUBLE_EQ(gcn_edge_weight(single, 0, 0), 1.0);
  CsrGraph path = fixture::path_graph(2);
  EXPECT_DOUBLE_EQ(gcn_edge_weight(path, 0, 1), 0.5);
  CsrGraph star = fixture::star_graph(3);
  EXPECT_NEAR(gcn_edge_weight(star, 1, 0), 1.0 / std::sqrt(8.0), 1e-15);
  EXPECT_NEAR(gcn_edge_weight(star, 1, 0), 0.35355, 1e-5);
}

TEST(GcnWeight, OutsideClosedNeighborhoodIsDomainError) {
  CsrGraph path = fixture::path_graph(3);
  EXPECT_THROW(gcn_edge_weight(path, 0, 2), DomainError);
}

TEST(GcnWeight, SymmetricOnSymmetricGraphs) {
  CsrGraph g = generate_power_law(300, 8, 3);
  for (uint32_t v = 0; v < g.num_vertices; ++v) {
    for (uint32_t u : g.neighbors(v)) {
      EXPECT_DOUBLE_EQ(gcn_edge_weight(g, u, v), gcn_edge_weight(g, v, u));
    }
  }
}

TEST(PowerLaw, SingleVertex) {
  CsrGraph g = generate_power_law(1, 0.5, 1);
  EXPECT_EQ(g.num_vertices, 1u);
  EXPECT_EQ(g.num_edges(), 0u);
}

TEST(PowerLaw, Deterministic) {
  EXPECT_EQ(generate_power_law(2000, 10, 42), generate_power_law(2000, 10, 42));
  EXPECT_NE(generate_power_law(2000, 10, 42), generate_power_law(2000, 10, 43));
}

TEST(PowerLaw, MeanDegreeNearTarget) {
  CsrGraph g = generate_power_law(10000, 20, 7);
  const double mean = static_cast<double>(g.num_edges()) / g.num_vertices;
  EXPECT_GE(mean, 18.0);
  EXPECT_LE(mean, 22.0);
  EXPECT_TRUE(g.symmetric);
  EXPECT_NO_THROW(g.validate());
}

TEST(PowerLaw, HeavyTail) {
  CsrGraph g = generate_power_law(10000, 20, 7);
  uint32_t max_degree = 0;
  for (uint32_t v = 0; v < g.num_vertices; ++v) {
    max_degree = std::max(max_degree, g.degree(v));
  }
  EXPECT_GT(max_degree, 10u * 20u);
}

TEST(PowerLaw, RejectsDegreeAboveVertexCount) {
  EXPECT_THROW(generate_power_law(10, 10, 1), ParamError);
}

TEST(Histogram, Examples) {
  CsrGraph path = fixture::path_graph(3);
  EXPECT_EQ(degree_histogram(path, {1}), (std::vector<uint64_t>{2, 1}));
  CsrGraph empty = from_edges(0, {}, true);
  EXPECT_EQ(degree_histogram(empty, {1, 5}), (std::vector<uint64_t>{0, 0, 0}));
  CsrGraph g = generate_power_law(10000, 20, 9);
  auto h = degree_histogram(g, {5, 10, 50, 100});
  EXPECT_EQ(std::accumulate(h.begin(), h.end(), uint64_t{0}), 10000u);
}

TEST(Invariants, DegreeSumAndClosedCount) {
  CsrGraph g = generate_power_law(500, 6, 11);
  uint64_t sum = 0;
  for (uint32_t v = 0; v < g.num_vertices; ++v) sum += g.degree(v);
  EXPECT_EQ(sum, g.num_edges());
  EXPECT_EQ(sum % 2, 0u);
  EXPECT_EQ(g.closed_edge_count(), sum + g.num_vertices);
}

TEST(Csr, BinaryRoundTrip) {
  CsrGraph g = generate_power_law(700, 7, 2);
  std::stringstream s;
  write_csr(s, g);
  const std::string bytes = s.str();
  EXPECT_EQ(bytes.substr(0, 4), "GNRC");
  std::istringstream in(bytes);
  EXPECT_EQ(read_csr(in), g);
}

TEST(Csr, EdgeListRoundTrip) {
  CsrGraph g = generate_power_law(300, 5, 4);
  std::stringstream s;
  save_edge_list(s, g);
  CsrGraph back = load_edge_list(s, true);
  back.num_vertices = std::max(back.num_vertices, g.num_vertices);
  back.row_ptr.resize(g.num_vertices + 1, back.row_ptr.back());
  EXPECT_EQ(back, g);
}

TEST(Csr, ValidateCatchesBrokenInvariants) {
  CsrGraph g = fixture::path_graph(3);
  CsrGraph bad = g;
  bad.col_idx[0] = 7;
  EXPECT_THROW(bad.validate(), InputError);
  bad = g;
  bad.row_ptr[1] = 3;
  bad.row_ptr[2] = 2;
  EXPECT_THROW(bad.validate(), InputError);
  bad = from_edges(3, {{0, 1}}, false);
  bad.symmetric = true;
  EXPECT_THROW(bad.validate(), InputError);
}

TEST(Presets, MatchDatasetTable) {
  auto rd = find_preset("RD");
  ASSERT_TRUE(rd.has_value());
  EXPECT_EQ(rd->num_vertices, 232965u);
  EXPECT_EQ(rd->num_edges, 114615892u);
  EXPECT_EQ(rd->feature_dim, 602u);
  auto am = find_preset("AM");
  ASSERT_TRUE(am.has_value());
  EXPECT_EQ(am->num_vertices, 2449029u);
  EXPECT_DOUBLE_EQ(am->lambda, 0.35);
  EXPECT_DOUBLE_EQ(find_preset("PT")->lambda, 0.0);
  EXPECT_DOUBLE_EQ(find_preset("YP")->lambda, 0.35);
  EXPECT_FALSE(find_preset("XX").has_value());
  EXPECT_EQ(graph_presets().size(), 4u);
}

}  // namespace
}  // namespace gnnear
