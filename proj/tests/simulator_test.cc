#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "gnnear/common.h"
#include "gnnear/isa.h"
#include "gnnear/simulator.h"
#include "support/fixtures.h"
#include "support/oracles.h"

namespace gnnear {
namespace {

std::string report_text(const SimInputs& in, const SimOptions& o,
                        const SimResult& r) {
  std::ostringstream s;
  write_report(s, make_report(in, o, r, nullptr));
  return s.str();
}

struct Case {
  Variant variant;
  bool timed;
  bool all_on;
};

class OracleEquivalence : public ::testing::TestWithParam<Case> {};

TEST_P(OracleEquivalence, Fp32MatchesReference) {
  const Case c = GetParam();
  auto w = fixture::make_workload(generate_power_law(300, 8, 3), c.variant,
                                  {24, 12, 6});
  SimOptions o = fixture::small_options();
  o.timed = c.timed;
  if (!c.all_on) o.toggles = Toggles::all_off();
  if (c.variant == Variant::kGat) o.toggles.ieo = false;
  SimResult r = simulate_epoch(w->in, o);
  Validation v = validate_against_reference(w->in, r);
  EXPECT_TRUE(v.pass) << v.divergence;
  EXPECT_LE(v.max_deviation, 1e-4);
}

std::vector<Case> all_cases() {
  std::vector<Case> out;
  for (Variant v : {Variant::kGcn, Variant::kGin, Variant::kSage, Variant::kGat}) {
    for (bool timed : {false, true}) {
      for (bool on : {false, true}) out.push_back({v, timed, on});
    }
  }
  return out;
}

INSTANTIATE_TEST_SUITE_P(Variants, OracleEquivalence,
                         ::testing::ValuesIn(all_cases()));

TEST(Bf16, SequentialOrderWithinTolerance) {
  for (Variant v : {Variant::kGcn, Variant::kGin, Variant::kSage, Variant::kGat}) {
    auto w = fixture::make_workload(generate_power_law(300, 6, 7), v,
                                    {32, 16, 8}, Precision::kBf16);
    SimOptions o = fixture::small_options();
    o.toggles.ieo = false;
    Validation val = validate_against_reference(w->in, simulate_epoch(w->in, o));
    EXPECT_TRUE(val.pass) << variant_name(v) << " " << val.divergence;
    EXPECT_DOUBLE_EQ(tolerance_for(Precision::kBf16), 2e-2);
  }
}

TEST(Drivers, TimedAndSequentialCountTheSameTraffic) {
  auto w = fixture::make_workload(generate_power_law(400, 8, 5), Variant::kGcn,
                                  {16, 8, 4});
  SimOptions o = fixture::small_options();
  SimResult timed = simulate_epoch(w->in, o);
  o.timed = false;
  SimResult seq = simulate_epoch(w->in, o);
  EXPECT_EQ(timed.counters.off_chip_read_bytes, seq.counters.off_chip_read_bytes);
  EXPECT_EQ(timed.counters.off_chip_write_bytes, seq.counters.off_chip_write_bytes);
  EXPECT_EQ(timed.counters.local_read_bytes, seq.counters.local_read_bytes);
  EXPECT_EQ(timed.counters.layers, seq.counters.layers);
  EXPECT_GT(timed.counters.makespan_cycles, 0u);
  EXPECT_GT(timed.counters.dram_commands, 0u);
}

TEST(Window, SizeOneTraceEqualsBaseWorkflow) {
  auto w = fixture::make_workload(generate_power_law(500, 8, 2), Variant::kSage,
                                  {16, 8, 4});
  SimOptions o = fixture::small_options();
  o.toggles.window = false;
  SimResult r = simulate_epoch(w->in, o);
  EXPECT_EQ(r.trace, base_workflow_trace(w->in, o));
  for (const PhaseLog& p : r.phases) {
    for (std::size_t i = 0; i < p.commits.size(); ++i) EXPECT_EQ(p.commits[i], i);
  }
}

TEST(Window, CommitOrderGapless) {
  auto w = fixture::make_workload(generate_power_law(800, 8, 4), Variant::kGcn,
                                  {16, 8, 4});
  SimOptions o = fixture::small_options();
  o.shard.C = 31;
  SimResult r = simulate_epoch(w->in, o);
  for (const PhaseLog& p : r.phases) {
    if (!p.has_aggregate) continue;
    ASSERT_EQ(p.commits.size(), (800 + 30) / 31);
    for (std::size_t i = 0; i < p.commits.size(); ++i) EXPECT_EQ(p.commits[i], i);
  }
}

TEST(Broadcast, DuplicateWritesScaleWithDimms) {
  auto w = fixture::make_workload(generate_power_law(600, 10, 8), Variant::kGcn,
                                  {16, 8, 4});
  SimOptions o = fixture::small_options(2, 4);
  o.timed = false;
  SimResult on = simulate_epoch(w->in, o);
  o.toggles.broadcast = false;
  SimResult off = simulate_epoch(w->in, o);
  ASSERT_GT(on.counters.dup_write_bytes, 0u);
  EXPECT_EQ(off.counters.dup_write_bytes, 4 * on.counters.dup_write_bytes);
  EXPECT_GT(on.counters.b_types, 0u);
  EXPECT_EQ(off.counters.b_types, 0u);
  EXPECT_EQ(on.counters.local_write_bytes, off.counters.local_write_bytes);
}

TEST(Broadcast, NoDuplicationNoBTypes) {
  auto w = fixture::make_workload(generate_power_law(300, 6, 1), Variant::kGcn,
                                  {16, 8});
  SimOptions o = fixture::small_options();
  o.lambda = 0.0;
  SimResult r = simulate_epoch(w->in, o);
  EXPECT_EQ(r.counters.b_types, 0u);
  const uint64_t b = isa::encode(isa::BType{});
  for (const auto& ch : r.trace) {
    for (uint64_t word : ch) EXPECT_NE(word, b);
  }
}

TEST(Counters, LocalReadsEqualLoadedBytes) {
  auto w = fixture::make_workload(generate_power_law(400, 8, 6), Variant::kGin,
                                  {16, 8, 4});
  SimOptions o = fixture::small_options();
  SimResult r = simulate_epoch(w->in, o);
  uint64_t loaded = 0;
  for (const auto& ch : r.trace) {
    for (uint64_t word : ch) {
      const isa::Instruction in = isa::decode(word);
      if (const auto* l = std::get_if<isa::LType>(&in)) {
        loaded += l->vector_size;
      }
    }
  }
  EXPECT_EQ(r.counters.local_read_bytes, loaded);
  uint64_t per_dimm = 0;
  for (uint64_t b : r.counters.dimm_local_read_bytes) per_dimm += b;
  EXPECT_EQ(per_dimm, loaded);
}

TEST(Counters, ReadoutsWithinHoldingDimmBound) {
  CsrGraph g = generate_power_law(500, 10, 9);
  auto w = fixture::make_workload(g, Variant::kGcn, {16, 8, 4});
  SimOptions o = fixture::small_options(2, 4);
  o.audit = true;
  SimResult r = simulate_epoch(w->in, o);
  ASSERT_EQ(r.readout_bytes.size(), r.readout_vector_bytes.size());
  ASSERT_FALSE(r.readout_bytes.empty());
  CsrGraph gt = w->graph.transposed();
  std::size_t k = 0;
  for (const PhaseLog& p : r.phases) {
    if (!p.has_aggregate) continue;
    const CsrGraph& pg = p.dir == Direction::kForward ? w->graph : gt;
    for (uint32_t v = 0; v < 500; ++v) {
      std::set<uint32_t> holders;
      for (uint32_t d : r.placement.holders(v)) holders.insert(d);
      for (uint32_t u : pg.neighbors(v)) {
        for (uint32_t d : r.placement.holders(u)) holders.insert(d);
      }
      EXPECT_LE(r.readout_bytes[k][v], holders.size() * r.readout_vector_bytes[k]);
    }
    ++k;
  }
}

TEST(Saving, DenseGraphOnSixteenDimms) {
  auto w = fixture::make_workload(generate_power_law(3000, 60, 3), Variant::kGcn,
                                  {64, 16});
  SimOptions o;
  o.timed = false;
  o.functional = false;
  o.toggles.ieo = false;
  SimResult nmp = simulate_epoch(w->in, o);
  o.toggles = Toggles::all_off();
  SimResult base = simulate_epoch(w->in, o);
  const double s = reduction_saving(make_report(w->in, o, base, nullptr),
                                    make_report(w->in, o, nmp, nullptr));
  EXPECT_GE(s, 70.0);
  EXPECT_LT(s, 100.0);
}

TEST(Determinism, ReportsAndTracesRepeat) {
  auto w = fixture::make_workload(generate_power_law(400, 8, 10), Variant::kGcn,
                                  {16, 8, 4});
  SimOptions o = fixture::small_options();
  o.record_commands = true;
  SimResult a = simulate_epoch(w->in, o);
  SimResult b = simulate_epoch(w->in, o);
  EXPECT_EQ(report_text(w->in, o, a), report_text(w->in, o, b));
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_EQ(a.commands, b.commands);
}

TEST(Audit, CommandTraceHasNoViolations) {
  auto w = fixture::make_workload(generate_power_law(400, 8, 10), Variant::kSage,
                                  {32, 8, 4});
  SimOptions o = fixture::small_options();
  o.record_commands = true;
  SimResult r = simulate_epoch(w->in, o);
  ASSERT_FALSE(r.commands.empty());
  auto errors = oracle::check_command_trace(r.commands, o.timing,
                                            o.shape.ranks_per_dimm);
  EXPECT_TRUE(errors.empty()) << errors.front();
}

TEST(Fault, DoubledEdgeWeightReportsDivergence) {
  auto w = fixture::make_workload(generate_power_law(200, 6, 4), Variant::kGcn,
                                  {16, 8, 4});
  SimOptions o = fixture::small_options();
  o.fault_edge = 17;
  Validation v = validate_against_reference(w->in, simulate_epoch(w->in, o));
  EXPECT_FALSE(v.pass);
  EXPECT_GT(v.max_deviation, 1e-4);
  EXPECT_EQ(v.divergence.rfind("h[1] row ", 0), 0u) << v.divergence;
  SimReport rep = make_report(w->in, o, simulate_epoch(w->in, o), &v);
  EXPECT_EQ(rep.verdict, "FAIL");
}

TEST(Fingerprint, DependsOnInputs) {
  auto a = fixture::make_workload(generate_power_law(100, 4, 1), Variant::kGcn, {8, 4});
  auto b = fixture::make_workload(generate_power_law(100, 4, 1), Variant::kGcn, {8, 4});
  auto c = fixture::make_workload(generate_power_law(100, 4, 2), Variant::kGcn, {8, 4});
  EXPECT_EQ(workload_fingerprint(a->in), workload_fingerprint(b->in));
  EXPECT_NE(workload_fingerprint(a->in), workload_fingerprint(c->in));
  EXPECT_EQ(workload_fingerprint(a->in).size(), 16u);
}

TEST(Options, Validation) {
  SimOptions o;
  o.toggles.hgp = false;
  EXPECT_THROW(o.validate(), ConfigError);
  o = SimOptions{};
  o.toggles.nmp = false;
  EXPECT_THROW(o.validate(), ConfigError);
  o = SimOptions{};
  o.window_size = 0;
  EXPECT_THROW(o.validate(), ConfigError);
  auto w = fixture::make_workload(fixture::path_graph(10), Variant::kGat, {4, 2});
  EXPECT_THROW(simulate_epoch(w->in, SimOptions{}), ConfigError);
}

}  // namespace
}  // namespace gnnear
