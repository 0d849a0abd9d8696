#include <gtest/gtest.h>

#include <cstdint>

#include "hire/gather_bench.hpp"

namespace {

using hire::GatherBenchConfig;
using hire::GatherBenchResult;

TEST(GatherBench, ChecksumAndByteParity) {
  GatherBenchConfig cfg;
  cfg.n_groups = 512;
  cfg.g = 8;
  cfg.d = 64;
  cfg.fraction_selected = 0.25;
  cfg.repeats = 5;
  cfg.seed = 1;
  const GatherBenchResult r = hire::run_gather_bench(cfg);
  EXPECT_TRUE(r.checksum_ok);
  EXPECT_EQ(r.groups_selected, 128u);
  EXPECT_EQ(r.bytes_moved, 128u * 8 * 64 * 4);
  EXPECT_GT(r.sparse_ns, 0.0);
  EXPECT_GT(r.dense_ns, 0.0);
  EXPECT_GT(r.efficiency_paper, 0.0);
  EXPECT_NEAR(r.efficiency_paper * r.efficiency_ratio, 1.0, 1e-9);
}

TEST(GatherBench, FractionOneSelectsAllGroups) {
  GatherBenchConfig cfg;
  cfg.n_groups = 64;
  cfg.g = 4;
  cfg.d = 32;
  cfg.fraction_selected = 1.0;
  cfg.repeats = 3;
  cfg.seed = 2;
  const GatherBenchResult r = hire::run_gather_bench(cfg);
  EXPECT_EQ(r.groups_selected, 64u);
  EXPECT_EQ(r.bytes_moved, 64u * 4 * 32 * 4);
  EXPECT_TRUE(r.checksum_ok);
}

// One group spanning the whole buffer: the sparse path is a single big
// memcpy, so the two paths should time within noise of each other.
TEST(GatherBench, WholeBufferGroupNearUnitRatio) {
  GatherBenchConfig cfg;
  cfg.n_groups = 1;
  cfg.g = 4096;
  cfg.d = 512;  // 8 MiB
  cfg.fraction_selected = 1.0;
  cfg.repeats = 15;
  cfg.seed = 3;
  const GatherBenchResult r = hire::run_gather_bench(cfg);
  EXPECT_TRUE(r.checksum_ok);
  EXPECT_GE(r.efficiency_ratio, 0.8);
  EXPECT_LE(r.efficiency_ratio, 1.25);
}

TEST(GatherBench, DeterministicSelectionUnderSeed) {
  GatherBenchConfig cfg;
  cfg.n_groups = 256;
  cfg.g = 2;
  cfg.d = 16;
  cfg.fraction_selected = 0.5;
  cfg.repeats = 3;
  cfg.seed = 4;
  const GatherBenchResult a = hire::run_gather_bench(cfg);
  const GatherBenchResult b = hire::run_gather_bench(cfg);
  EXPECT_EQ(a.groups_selected, b.groups_selected);
  EXPECT_EQ(a.bytes_moved, b.bytes_moved);
  EXPECT_TRUE(a.checksum_ok);
  EXPECT_TRUE(b.checksum_ok);
}

TEST(GatherBench, ConfigValidation) {
  GatherBenchConfig cfg;
  cfg.repeats = 2;
  EXPECT_THROW(hire::run_gather_bench(cfg), std::invalid_argument);
  cfg.repeats = 3;
  cfg.fraction_selected = 0.0;
  EXPECT_THROW(hire::run_gather_bench(cfg), std::invalid_argument);
  cfg.fraction_selected = 1.5;
  EXPECT_THROW(hire::run_gather_bench(cfg), std::invalid_argument);
}

}  // namespace
