#include <gtest/gtest.h>

#include <vector>

#include "gnnear/common.h"
#include "gnnear/isa.h"
#include "gnnear/nme.h"

namespace gnnear {
namespace {

isa::CType c_type(uint16_t dst, float w) {
  return isa::CType{0, isa::AggOp::kWeightedSum, float_to_bf16(w), dst};
}

TEST(Config, PeakIs128Gflops) {
  EXPECT_DOUBLE_EQ(NmeConfig{}.peak_flops(), 128e9);
  NmeConfig bad;
  bad.num_pes = 0;
  EXPECT_THROW(validate(bad), ConfigError);
}

TEST(ExecC, WeightedAccumulate) {
  NmeDatapath nme(NmeConfig{}, 2, 8, 4, Precision::kFp32);
  std::vector<float> x{1, 2};
  EXPECT_TRUE(nme.exec_l(5, x));
  nme.exec_c(c_type(0, 0.5f), 5, 0.5f);
  EXPECT_EQ(nme.exec_r(isa::RType{0, 0, 8}), (std::vector<float>{0.5f, 1.0f}));
}

TEST(ExecC, UnitWeightsSum) {
  NmeDatapath nme(NmeConfig{}, 3, 12, 2, Precision::kBf16);
  std::vector<std::vector<float>> xs{{1, 2, 3}, {4, 5, 6}, {-1, 0, 1}};
  for (uint64_t i = 0; i < xs.size(); ++i) {
    nme.exec_l(i, xs[i]);
    nme.exec_c(c_type(1, 1.0f), i, 0.0f);  // BF16 reads the word's weight
  }
  EXPECT_EQ(nme.exec_r(isa::RType{0, 1, 6}), (std::vector<float>{4, 7, 10}));
}

TEST(ExecC, BackToBackMeanWeights) {
  NmeDatapath nme(NmeConfig{}, 1, 4, 1, Precision::kFp32);
  std::vector<float> a{3}, b{6}, c{9};
  nme.exec_l(0, a);
  nme.exec_l(1, b);
  nme.exec_l(2, c);
  for (uint64_t t = 0; t < 3; ++t) nme.exec_c(c_type(0, 1.0f / 3), t, 1.0f / 3);
  EXPECT_NEAR(nme.exec_r(isa::RType{0, 0, 4})[0], 6.0f, 1e-6);
}

TEST(ExecC, CyclesPerInstruction) {
  EXPECT_EQ(NmeDatapath(NmeConfig{}, 256, 512, 1, Precision::kBf16).c_cycles(), 2u);
  EXPECT_EQ(NmeDatapath(NmeConfig{}, 128, 256, 1, Precision::kBf16).c_cycles(), 1u);
  EXPECT_EQ(NmeDatapath(NmeConfig{}, 129, 258, 1, Precision::kBf16).c_cycles(), 2u);
}

TEST(ExecC, MissingSourceIsProtocolError) {
  NmeDatapath nme(NmeConfig{}, 2, 8, 2, Precision::kFp32);
  EXPECT_THROW(nme.exec_c(c_type(0, 1), 3, 1), ProtocolError);
  std::vector<float> x{1, 1};
  nme.exec_l(3, x);
  EXPECT_THROW(nme.exec_c(c_type(2, 1), 3, 1), ProtocolError);
}

TEST(ExecL, ReuseSkipsLoad) {
  NmeDatapath nme(NmeConfig{}, 2, 8, 1, Precision::kFp32);
  std::vector<float> x{1, 1};
  EXPECT_TRUE(nme.exec_l(1, x));
  EXPECT_FALSE(nme.exec_l(1, x));
  nme.evict(1);
  EXPECT_FALSE(nme.resident(1));
  EXPECT_TRUE(nme.exec_l(1, x));
}

TEST(ExecR, FreesSlotAndRejectsEmpty) {
  NmeDatapath nme(NmeConfig{}, 2, 8, 2, Precision::kFp32);
  EXPECT_THROW(nme.exec_r(isa::RType{0, 0, 8}), ProtocolError);
  std::vector<float> x{1, 1};
  nme.exec_l(1, x);
  nme.exec_c(c_type(1, 1), 1, 1);
  EXPECT_TRUE(nme.slot_live(1));
  EXPECT_EQ(nme.resident_bytes(), 16u);
  nme.exec_r(isa::RType{0, 1, 8});
  EXPECT_FALSE(nme.slot_live(1));
  EXPECT_THROW(nme.exec_r(isa::RType{0, 1, 8}), ProtocolError);
  EXPECT_EQ(nme.mac_ops(), 2u);
}

TEST(Buffer, OverflowDetected) {
  NmeConfig cfg;
  cfg.buffer_bytes = 1024;
  NmeDatapath nme(cfg, 128, 512, 4, Precision::kFp32);
  std::vector<float> x(128, 1.0f);
  nme.exec_l(0, x);
  nme.exec_c(c_type(0, 1), 0, 1);
  EXPECT_EQ(nme.high_water_bytes(), 1024u);
  EXPECT_THROW(nme.exec_l(1, x), StateError);
}

TEST(Buffer, ShardFootprint) {
  EXPECT_EQ(shard_buffer_bytes(1, 127, 2048, false), 128u * 2048);
  EXPECT_EQ(shard_buffer_bytes(1, 127, 2048, true), 129u * 2048);
  EXPECT_LE(shard_buffer_bytes(1, 127, 2048, true), 256u * 1024 + 2048);
}

TEST(Overlap, PipelineExamples) {
  std::vector<uint64_t> load(10, 25), compute(10, 30);
  EXPECT_EQ(shard_pipeline_makespan(load, compute, true), 325u);
  EXPECT_EQ(shard_pipeline_makespan(load, compute, false), 550u);
  std::vector<uint64_t> zero(10, 0);
  EXPECT_EQ(shard_pipeline_makespan(load, zero, true), 250u);
  std::vector<uint64_t> l1{25}, c1{30};
  EXPECT_EQ(shard_pipeline_makespan(l1, c1, true), 55u);
  EXPECT_EQ(shard_pipeline_makespan(l1, c1, false), 55u);
  EXPECT_THROW(shard_pipeline_makespan(l1, zero, true), ParamError);
}

TEST(Overlap, NeverSlowerAndBoundedBelow) {
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(20);
    std::vector<uint64_t> load(n), compute(n);
    uint64_t sl = 0, sc = 0;
    for (std::size_t k = 0; k < n; ++k) {
      load[k] = rng.below(100);
      compute[k] = rng.below(100);
      sl += load[k];
      sc += compute[k];
    }
    const uint64_t with = shard_pipeline_makespan(load, compute, true);
    EXPECT_LE(with, shard_pipeline_makespan(load, compute, false));
    EXPECT_GE(with, std::max(sl, sc));
    EXPECT_EQ(shard_pipeline_makespan(load, compute, false), sl + sc);
  }
}

}  // namespace
}  // namespace gnnear
