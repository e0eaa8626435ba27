#ifndef GNNEAR_TESTS_SUPPORT_FIXTURES_H_
#define GNNEAR_TESTS_SUPPORT_FIXTURES_H_

#include <memory>
#include <utility>
#include <vector>

#include "gnnear/graph.h"
#include "gnnear/model.h"
#include "gnnear/simulator.h"

namespace gnnear::fixture {

struct Workload {
  CsrGraph graph;
  SimInputs in;
};

inline std::unique_ptr<Workload> make_workload(CsrGraph g, Variant v,
                                               std::vector<uint32_t> widths,
                                               Precision p = Precision::kFp32,
                                               uint64_t seed = 1) {
  auto w = std::make_unique<Workload>();
  w->graph = std::move(g);
  const uint32_t n = w->graph.num_vertices;
  w->in.graph = &w->graph;
  w->in.model = make_model(v, widths, p);
  w->in.state = init_state(w->in.model, seed);
  w->in.features = random_features(n, widths.front(), seed + 100);
  w->in.labels = random_labels(n, widths.back(), seed + 200);
  return w;
}

inline CsrGraph path_graph(uint32_t n) {
  std::vector<Edge> e;
  for (uint32_t v = 0; v + 1 < n; ++v) e.push_back({v, v + 1});
  return from_edges(n, e, true);
}

inline CsrGraph star_graph(uint32_t leaves) {
  std::vector<Edge> e;
  for (uint32_t v = 1; v <= leaves; ++v) e.push_back({0, v});
  return from_edges(leaves + 1, e, true);
}

inline CsrGraph triangle() {
  return from_edges(3, {{0, 1}, {1, 2}, {0, 2}}, true);
}

// Small system so that tests exercise several channels and DIMMs.
inline SimOptions small_options(uint32_t channels = 2, uint32_t dimms = 2) {
  SimOptions o;
  o.shape.channels = channels;
  o.shape.dimms_per_channel = dimms;
  return o;
}

}  // namespace gnnear::fixture

#endif  // GNNEAR_TESTS_SUPPORT_FIXTURES_H_
