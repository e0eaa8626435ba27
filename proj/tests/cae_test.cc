#include <gtest/gtest.h>

#include <map>
#include <set>
#include <vector>

#include "gnnear/cae.h"
#include "gnnear/common.h"
#include "gnnear/nme.h"
#include "support/fixtures.h"
#include "support/oracles.h"

namespace gnnear {
namespace {

PartitionConfig shape(uint32_t channels, uint32_t dimms, double lambda = 0.0) {
  PartitionConfig c;
  c.channels = channels;
  c.dimms_per_channel = dimms;
  c.lambda = lambda;
  c.mode = lambda > 0 ? PartitionMode::kHybrid : PartitionMode::kEven;
  return c;
}

ShardConfig shard(uint32_t r, uint32_t c) {
  ShardConfig s;
  s.R = r;
  s.C = c;
  return s;
}

TEST(Config, PeakRates) {
  CaeConfig c;
  EXPECT_DOUBLE_EQ(c.quoted_peak_flops, 22e12);
  EXPECT_NEAR(c.gemm_array_peak_flops(), 22.94e12, 0.01e12);
  EXPECT_EQ(c.vpu_lanes(), 512u);
  EXPECT_NO_THROW(validate(c));
  c.vpu_cores = 0;
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(Cost, GemmTiles) {
  CaeConfig c;
  EXPECT_EQ(gemm_cycles(128, 256, 256, c), 768u);
  EXPECT_EQ(gemm_cycles(1, 256, 256, c), 768u);
  EXPECT_EQ(gemm_cycles(129, 256, 256, c), 1536u);
  EXPECT_THROW(gemm_cycles(128, 0, 256, c), ParamError);
  EXPECT_EQ(update_cost(CaeOp::kGemm, 128, 256, 256, c), 768u);
}

TEST(Cost, VpuOps) {
  CaeConfig c;
  EXPECT_EQ(update_cost(CaeOp::kMerge, 1, 1, 256, c), 1u);
  EXPECT_EQ(update_cost(CaeOp::kMerge, 1, 1, 513, c), 2u);
  EXPECT_EQ(update_cost(CaeOp::kActivation, 127, 1, 16, c), 4u);
  EXPECT_EQ(update_cost(CaeOp::kOuterProduct, 2, 16, 32, c), 2u);
}

TEST(Cost, ScratchpadLimit) {
  CaeConfig c;
  EXPECT_NO_THROW(check_scratchpad(make_model(Variant::kGcn, {602, 256, 41}), c));
  EXPECT_THROW(check_scratchpad(make_model(Variant::kGcn, {4096, 4096}), c),
               ConfigError);
}

TEST(Merge, Elementwise) {
  std::vector<float> acc{1, 1};
  std::vector<float> p{2, 0};
  merge_partials(acc, p);
  EXPECT_EQ(acc, (std::vector<float>{3, 1}));
  std::vector<float> zero{0, 0, 0};
  std::vector<float> only{4, 5, 6};
  merge_partials(zero, only);
  EXPECT_EQ(zero, only);
}

TEST(Shards, IdleDimmEmitsNothing) {
  // Vertices 0..3 only touch each other; with 2 DIMMs and interval [0, 2)
  // vertices homed on DIMM 1 (1 and 3) have no edge into {0}.
  CsrGraph g = from_edges(4, {{0, 2}, {1, 3}}, true);
  Placement p = even_partition(g, shape(1, 2));
  ShardPlanner sp(g, nullptr, p, shard(1, 1), true);
  auto progs = sp.plan(0);
  ASSERT_EQ(progs.size(), 2u);
  EXPECT_FALSE(progs[0].empty());
  EXPECT_TRUE(progs[1].empty());
}

TEST(Shards, SourceWithThreeDestinations) {
  CsrGraph g = from_edges(5, {{4, 1}, {4, 2}, {4, 3}}, true);
  Placement p = even_partition(g, shape(1, 1));
  ShardPlanner sp(g, nullptr, p, shard(1, 4), true);
  auto prog = sp.plan(0)[0];
  uint32_t loads = 0;
  uint32_t computes = 0;
  for (const ShardOp& op : prog.ops) {
    if (op.vertex != 4) continue;
    loads += op.kind == ShardOp::kLoad;
    computes += op.kind == ShardOp::kCompute;
  }
  EXPECT_EQ(loads, 1u);
  EXPECT_EQ(computes, 3u);
  EXPECT_EQ(prog.reads, 4u);
}

TEST(Shards, EveryClosedEdgeComputedOnce) {
  CsrGraph g = generate_power_law(700, 8, 2);
  Placement p = hybrid_partition(g, shape(2, 4, 0.2));
  for (ShardConfig s : {shard(1, 127), shard(4, 60), shard(16, 16)}) {
    for (bool narrow : {true, false}) {
      ShardPlanner sp(g, nullptr, p, s, narrow);
      std::map<std::pair<uint32_t, uint32_t>, int> seen;
      for (uint32_t i = 0; i < sp.num_intervals(); ++i) {
        for (const DimmProgram& prog : sp.plan(i)) {
          std::vector<uint8_t> loaded(700, 0);
          for (const ShardOp& op : prog.ops) {
            if (op.kind == ShardOp::kLoad) loaded[op.vertex] = 1;
            if (op.kind == ShardOp::kCompute) {
              ASSERT_TRUE(loaded[op.vertex]);
              EXPECT_EQ(p.worker_dimm(op.vertex, i), prog.dimm);
              ++seen[{op.vertex, sp.interval(i).begin + op.slot}];
            }
          }
        }
      }
      EXPECT_EQ(seen.size(), g.closed_edge_count());
      for (auto& [e, n] : seen) ASSERT_EQ(n, 1);
    }
  }
}

TEST(Shards, ReadoutsBoundedByHoldingDimms) {
  CsrGraph g = generate_power_law(600, 10, 12);
  Placement p = hybrid_partition(g, shape(2, 4, 0.3));
  ShardPlanner sp(g, nullptr, p, shard(1, 127), true);
  std::vector<uint32_t> reads(600, 0);
  for (uint32_t i = 0; i < sp.num_intervals(); ++i) {
    for (const DimmProgram& prog : sp.plan(i)) {
      for (const ShardOp& op : prog.ops) {
        if (op.kind == ShardOp::kRead) ++reads[op.vertex];
      }
    }
  }
  for (uint32_t v = 0; v < 600; ++v) {
    std::set<uint32_t> holders;
    for (uint32_t u : g.neighbors(v)) {
      for (uint32_t d : p.holders(u)) holders.insert(d);
    }
    for (uint32_t d : p.holders(v)) holders.insert(d);
    EXPECT_LE(reads[v], std::min<std::size_t>(g.degree_tilde(v), holders.size()));
    EXPECT_GE(reads[v], 1u);
  }
}

TEST(Shards, OneByOneTwentySevenHasFewestLoads) {
  CsrGraph g = generate_power_law(20000, 20, 4);
  Placement p = even_partition(g, shape(4, 4));
  const uint64_t best = count_shard_loads(g, p, shard(1, 127)).loads;
  for (ShardConfig s : {shard(2, 126), shard(4, 124), shard(8, 120),
                        shard(16, 112), shard(32, 96), shard(64, 64),
                        shard(1, 64), shard(1, 16)}) {
    EXPECT_LT(best, count_shard_loads(g, p, s).loads) << s.R << "x" << s.C;
  }
}

TEST(Shards, MergedPartialsMatchOracle) {
  CsrGraph g = generate_power_law(50, 4, 7);
  Placement p = even_partition(g, shape(2, 2));
  ModelConfig cfg = make_model(Variant::kGcn, {6, 3});
  Matrix x = random_features(50, 6, 1);
  TrainerState s = init_state(cfg, 1);
  EdgeWeights w = forward_edge_weights(g, cfg, s.weights[0], x);
  ShardPlanner sp(g, &w, p, shard(1, 16), true);
  WindowScheduler ws(1, 4, sp.num_intervals(), 16, 6);
  Matrix out(50, 6);
  for (uint32_t i = 0; i < sp.num_intervals(); ++i) {
    auto progs = sp.plan(i);
    for (const DimmProgram& prog : progs) {
      ws.admit(prog.dimm, prog.reads);
      NmeDatapath nme(NmeConfig{}, 6, 24, 16, Precision::kFp32);
      for (const ShardOp& op : prog.ops) {
        switch (op.kind) {
          case ShardOp::kLoad:
            nme.exec_l(op.vertex, x.row(op.vertex));
            break;
          case ShardOp::kCompute:
            nme.exec_c(isa::CType{0, op.op, 0, op.slot}, op.vertex, op.weight);
            break;
          case ShardOp::kRead:
            ws.merge(i, op.slot, nme.exec_r(isa::RType{0, op.slot, 24}));
            break;
        }
      }
      ws.finish_issue(prog.dimm);
    }
    ASSERT_TRUE(ws.ready_to_commit());
    std::vector<float> rows = ws.commit();
    VertexRange r = sp.interval(i);
    for (uint32_t v = r.begin; v < r.end; ++v) {
      for (uint32_t c = 0; c < 6; ++c) out.at(v, c) = rows[(v - r.begin) * 6 + c];
    }
  }
  oracle::Dense a = oracle::adjacency(g, w);
  oracle::Dense expect(50, 6);
  for (uint32_t v = 0; v < 50; ++v) {
    for (uint32_t u = 0; u < 50; ++u) {
      for (uint32_t c = 0; c < 6; ++c) expect.at(v, c) += a.at(v, u) * x.at(u, c);
    }
  }
  EXPECT_LT(oracle::relative_error(out.data, expect.v), 1e-6);
}

TEST(Window, AdmissionBoundedByCommitted) {
  WindowScheduler ws(2, 2, 5, 4, 1);
  EXPECT_EQ(ws.admit(0, 1), 0u);
  EXPECT_FALSE(ws.may_admit(0));  // still issuing
  ws.finish_issue(0);
  EXPECT_EQ(ws.admit(0, 1), 1u);
  ws.finish_issue(0);
  EXPECT_FALSE(ws.may_admit(0));  // interval 2 >= committed + W
  ws.admit(1, 0);
  ws.finish_issue(1);
  std::vector<float> one{1};
  EXPECT_FALSE(ws.ready_to_commit());
  ws.merge(0, 2, one);
  ASSERT_TRUE(ws.ready_to_commit());
  std::vector<float> rows = ws.commit();
  EXPECT_EQ(rows, (std::vector<float>{0, 0, 1, 0}));
  EXPECT_TRUE(ws.may_admit(0));
  EXPECT_THROW(ws.merge(0, 0, one), ProtocolError);
  EXPECT_THROW(ws.merge(3, 0, one), ProtocolError);
  EXPECT_THROW(ws.commit(), StateError);
}

TEST(Window, CommitsInOrderWithoutGaps) {
  Rng rng(5);
  const uint32_t dimms = 3;
  const uint32_t n = 40;
  WindowScheduler ws(4, dimms, n, 1, 1);
  std::vector<std::vector<uint32_t>> outstanding(dimms);
  while (!ws.done()) {
    const auto d = static_cast<uint32_t>(rng.below(dimms));
    if (rng.below(2) && ws.may_admit(d)) {
      uint32_t i = ws.admit(d, 1);
      EXPECT_LT(i, ws.committed() + 4);
      ws.finish_issue(d);
      outstanding[d].push_back(i);
    } else if (!outstanding[d].empty()) {
      ws.merge_count(outstanding[d].front());
      outstanding[d].erase(outstanding[d].begin());
    }
    while (ws.ready_to_commit()) ws.commit();
  }
  std::vector<uint32_t> expect(n);
  for (uint32_t i = 0; i < n; ++i) expect[i] = i;
  EXPECT_EQ(ws.commit_log(), expect);
}

TEST(Window, SizeOneIsSequential) {
  WindowScheduler ws(1, 2, 3, 1, 1);
  ws.admit(0, 0);
  ws.finish_issue(0);
  EXPECT_FALSE(ws.may_admit(0));
  ws.admit(1, 0);
  ws.finish_issue(1);
  ws.commit();
  EXPECT_TRUE(ws.may_admit(0));
}

TEST(Ieo, TrafficClosedForm) {
  IeoTraffic t = ieo_traffic(1000, 100, 64, 64);
  EXPECT_DOUBLE_EQ(t.ratio(), 1.0);
  IeoTraffic r = ieo_traffic(100000, 1000, 512, 128);
  EXPECT_DOUBLE_EQ(r.aggregate_first, 100000.0 * 512 + 1000.0 * 128);
  EXPECT_DOUBLE_EQ(r.combine_first, 100000.0 * 128 + 1000.0 * 512);
  // Dense regime approaches d_in / d_out.
  EXPECT_NEAR(ieo_traffic(uint64_t{1} << 40, 1, 602, 256).ratio(), 602.0 / 256,
              1e-6);
}

}  // namespace
}  // namespace gnnear
