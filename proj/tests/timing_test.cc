#include <gtest/gtest.h>

#include <sstream>

#include "gnnear/common.h"
#include "gnnear/timing.h"
#include "support/oracles.h"

namespace gnnear {
namespace {

using C = Command;

std::vector<CommandRecord> drain(DramEngine& e, std::vector<DramCompletion>* out,
                                 uint64_t limit = 100000) {
  std::vector<DramCompletion> done;
  for (uint64_t now = 0; e.has_pending() && now < limit; ++now) e.tick(now, done);
  if (out) *out = done;
  return e.trace();
}

TEST(Params, TableValues) {
  TimingParams t;
  EXPECT_EQ(t.tRC, 56u);
  EXPECT_EQ(t.tRCD, 17u);
  EXPECT_EQ(t.tCL, 17u);
  EXPECT_EQ(t.tRP, 17u);
  EXPECT_EQ(t.tBL, 4u);
  EXPECT_EQ(t.tFAW, 26u);
  EXPECT_NO_THROW(t.validate());
  t.tCCD_L = 2;
  EXPECT_THROW(t.validate(), ConfigError);
}

TEST(CanIssue, ActToActSameBankRespectsTrc) {
  DramEngine e(TimingParams{}, 1);
  e.issue(C::kAct, 0, 0, 5, 0, 0, 0);
  EXPECT_FALSE(e.can_issue(C::kPre, 0, 0, 5, 0, 38));
  e.issue(C::kPre, 0, 0, 5, 0, 0, 39);
  EXPECT_FALSE(e.can_issue(C::kAct, 0, 0, 6, 0, 55));
  EXPECT_TRUE(e.can_issue(C::kAct, 0, 0, 6, 0, 56));
}

TEST(CanIssue, FifthActWaitsForFourActivationWindow) {
  DramEngine e(TimingParams{}, 1);
  e.issue(C::kAct, 0, 0, 1, 0, 0, 0);
  e.issue(C::kAct, 0, 4, 1, 0, 0, 6);
  e.issue(C::kAct, 0, 8, 1, 0, 0, 12);
  e.issue(C::kAct, 0, 12, 1, 0, 0, 18);
  for (uint64_t t = 19; t < 26; ++t) {
    EXPECT_FALSE(e.can_issue(C::kAct, 0, 1, 1, 0, t)) << t;
  }
  EXPECT_TRUE(e.can_issue(C::kAct, 0, 1, 1, 0, 26));
}

TEST(CanIssue, ColumnToColumnSameGroupRespectsTccdL) {
  DramEngine e(TimingParams{}, 1);
  e.issue(C::kAct, 0, 0, 3, 0, 0, 0);
  e.issue(C::kAct, 0, 1, 3, 0, 0, 6);
  e.issue(C::kRd, 0, 0, 3, 0, 1, 23);
  EXPECT_FALSE(e.can_issue(C::kRd, 0, 1, 3, 1, 28));
  EXPECT_TRUE(e.can_issue(C::kRd, 0, 1, 3, 1, 29));
}

TEST(CanIssue, DifferentGroupUsesTccdS) {
  DramEngine e(TimingParams{}, 1);
  e.issue(C::kAct, 0, 0, 3, 0, 0, 0);
  e.issue(C::kAct, 0, 4, 3, 0, 0, 4);
  e.issue(C::kRd, 0, 0, 3, 0, 1, 21);
  EXPECT_FALSE(e.can_issue(C::kRd, 0, 4, 3, 1, 24));
  EXPECT_TRUE(e.can_issue(C::kRd, 0, 4, 3, 1, 25));
}

TEST(CanIssue, IllegalStatesAreProtocolErrors) {
  DramEngine e(TimingParams{}, 2);
  EXPECT_THROW(e.can_issue(C::kRd, 0, 0, 0, 1, 5), ProtocolError);
  EXPECT_THROW(e.can_issue(C::kPre, 0, 0, 0, 0, 5), ProtocolError);
  e.issue(C::kAct, 1, 2, 9, 0, 0, 0);
  EXPECT_THROW(e.can_issue(C::kAct, 1, 2, 9, 0, 100), ProtocolError);
  EXPECT_THROW(e.can_issue(C::kWr, 1, 2, 8, 1, 100), ProtocolError);
  EXPECT_THROW(e.issue(C::kRd, 1, 2, 9, 0, 1, 3), ProtocolError);
}

TEST(Queue, SingleReadOnClosedRow) {
  DramEngine e(TimingParams{}, 1, 0, 0, true);
  ASSERT_TRUE(e.enqueue({7, false, 0, 3, 11, 0, 1}));
  std::vector<DramCompletion> done;
  auto trace = drain(e, &done);
  ASSERT_EQ(trace.size(), 2u);
  EXPECT_EQ(trace[0].cmd, C::kAct);
  EXPECT_EQ(trace[1].cmd, C::kRd);
  EXPECT_EQ(trace[1].cycle - trace[0].cycle, 17u);
  ASSERT_EQ(done.size(), 1u);
  EXPECT_EQ(done[0].id, 7u);
  EXPECT_EQ(done[0].cycle, trace[0].cycle + 17 + 17 + 4);
}

TEST(Queue, SecondReadToOpenRowIsHit) {
  DramEngine e(TimingParams{}, 1, 0, 0, true);
  e.enqueue({1, false, 0, 2, 4, 0, 1});
  e.enqueue({2, false, 0, 2, 4, 64, 1});
  auto trace = drain(e, nullptr);
  ASSERT_EQ(trace.size(), 3u);
  EXPECT_EQ(trace[2].cmd, C::kRd);
  EXPECT_EQ(e.row_hits(), 1u);
  EXPECT_EQ(e.row_misses(), 1u);
}

TEST(Queue, RowHitServedBeforeOlderConflict) {
  DramEngine e(TimingParams{}, 1, 0, 0, true);
  e.enqueue({1, false, 0, 0, 1, 0, 1});
  std::vector<DramCompletion> done;
  e.tick(0, done);  // ACT row 1
  e.enqueue({2, false, 0, 0, 2, 0, 1});
  e.enqueue({3, false, 0, 0, 1, 64, 1});
  for (uint64_t now = 1; e.has_pending(); ++now) e.tick(now, done);
  ASSERT_EQ(done.size(), 3u);
  EXPECT_EQ(done[0].id, 1u);
  EXPECT_EQ(done[1].id, 3u);
  EXPECT_EQ(done[2].id, 2u);
}

TEST(Queue, ThirtyThirdRequestStalls) {
  DramEngine e(TimingParams{}, 1);
  for (uint64_t i = 0; i < 32; ++i) {
    ASSERT_TRUE(e.enqueue({i, false, 0, 0, 0, 0, 1}));
  }
  EXPECT_FALSE(e.can_enqueue(false));
  EXPECT_FALSE(e.enqueue({32, false, 0, 0, 0, 0, 1}));
  EXPECT_TRUE(e.can_enqueue(true));
  EXPECT_EQ(e.queued(false), 32u);
}

std::vector<CommandRecord> random_stream(uint64_t seed, uint32_t ranks) {
  DramEngine e(TimingParams{}, ranks, 0, 0, true);
  Rng rng(seed);
  std::vector<DramCompletion> done;
  uint64_t id = 0;
  for (uint64_t now = 0; now < 400000 && (id < 3000 || e.has_pending()); ++now) {
    if (id < 3000 && rng.below(3) == 0) {
      DramRequest r;
      r.id = id;
      r.write = rng.below(4) == 0;
      r.rank = static_cast<uint32_t>(rng.below(ranks));
      r.bank = static_cast<uint32_t>(rng.below(16));
      r.row = static_cast<uint32_t>(rng.below(6));
      r.column = static_cast<uint32_t>(64 * rng.below(128));
      r.bursts = 1 + static_cast<uint32_t>(rng.below(4));
      if (e.enqueue(r)) ++id;
    }
    e.tick(now, done);
  }
  EXPECT_FALSE(e.has_pending());
  EXPECT_EQ(done.size(), 3000u);
  return e.trace();
}

TEST(TraceAudit, RandomStreamsHaveNoViolations) {
  for (uint64_t seed : {1, 2, 3}) {
    for (uint32_t ranks : {1u, 2u}) {
      auto trace = random_stream(seed, ranks);
      auto errors = oracle::check_command_trace(trace, TimingParams{}, ranks);
      EXPECT_TRUE(errors.empty()) << errors.front();
    }
  }
}

TEST(TraceAudit, CheckerCatchesInjectedViolations) {
  auto trace = random_stream(4, 1);
  ASSERT_GT(trace.size(), 10u);
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i].cmd == C::kRd && trace[i - 1].cmd == C::kAct &&
        trace[i - 1].bank == trace[i].bank) {
      auto bad = trace;
      bad[i].cycle = bad[i - 1].cycle + 16;
      EXPECT_FALSE(oracle::check_command_trace(bad, TimingParams{}, 1).empty());
      break;
    }
  }
  auto dup = trace;
  dup[1].cycle = dup[0].cycle;
  EXPECT_FALSE(oracle::check_command_trace(dup, TimingParams{}, 1).empty());
}

TEST(Determinism, IdenticalStreamsIdenticalTraces) {
  EXPECT_EQ(random_stream(9, 2), random_stream(9, 2));
}

TEST(TraceText, Format) {
  std::ostringstream s;
  write_command_trace(s, {{12, 1, 2, 0, 5, C::kAct, 77, 0, 0}});
  EXPECT_EQ(s.str(), "12 1 2 0 5 ACT 77 0\n");
}

}  // namespace
}  // namespace gnnear
