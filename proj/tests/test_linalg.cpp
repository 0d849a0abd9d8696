#include <gtest/gtest.h>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "hire/instance.hpp"
#include "hire/linalg.hpp"
#include "hire/rng.hpp"

namespace {

using hire::Activation;
using hire::ScoreMatrix;
using hire::TopKSet;

ScoreMatrix from_columns(std::size_t d,
                         const std::vector<std::vector<float>>& cols) {
  ScoreMatrix z(d, cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j)
    for (std::size_t i = 0; i < d; ++i) z.at(i, j) = cols[j][i];
  return z;
}

ScoreMatrix identity3() {
  ScoreMatrix z(3, 3);
  for (std::size_t i = 0; i < 3; ++i) z.at(i, i) = 1.0f;
  return z;
}

// Independent selection oracle: full sort of (value, index).
std::vector<std::uint32_t> sort_then_take(const std::vector<float>& v,
                                          std::size_t k) {
  std::vector<std::uint32_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::uint32_t a, std::uint32_t b) {
                     if (v[a] != v[b]) return v[a] > v[b];
                     return a < b;
                   });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

TEST(Matvec, IdentityMatrix) {
  const std::vector<float> x = {3, 1, 2};
  const auto out = hire::matvec(identity3(), x, Activation::kIdentity);
  EXPECT_EQ(out, (std::vector<float>{3, 1, 2}));
}

TEST(Matvec, HandInnerProductsRelu) {
  const ScoreMatrix z =
      from_columns(2, {{1, 0}, {0, 1}, {1, 1}, {-1, -1}});
  const std::vector<float> x = {2, 1};
  const auto out = hire::matvec(z, x, Activation::kRelu);
  EXPECT_EQ(out, (std::vector<float>{2, 1, 3, 0}));
}

TEST(Matvec, ZeroMatrix) {
  const ScoreMatrix z(2, 3);
  const std::vector<float> x = {5, -4};
  const auto out = hire::matvec(z, x, Activation::kRelu);
  EXPECT_EQ(out, (std::vector<float>{0, 0, 0}));
}

TEST(Matvec, DimensionMismatchNamesBothDims) {
  const ScoreMatrix z(3, 2);
  const std::vector<float> x = {1, 2};
  try {
    hire::matvec(z, x, Activation::kIdentity);
    FAIL() << "expected invalid_argument";
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("3"), std::string::npos);
    EXPECT_NE(msg.find("2"), std::string::npos);
  }
}

TEST(Matvec, SquaredRelu) {
  const ScoreMatrix z = from_columns(1, {{2}, {-3}});
  const std::vector<float> x = {1};
  const auto out = hire::matvec(z, x, Activation::kSquaredRelu);
  EXPECT_EQ(out, (std::vector<float>{4, 0}));
}

TEST(ExactTopk, IdentityArgmax) {
  const std::vector<float> x = {3, 1, 2};
  const TopKSet s = hire::exact_topk(identity3(), x, 1, Activation::kIdentity);
  ASSERT_EQ(s.entries.size(), 1u);
  EXPECT_EQ(s.entries[0].index, 0u);
  EXPECT_EQ(s.entries[0].value, 3.0f);
  EXPECT_FALSE(s.clamped);
}

TEST(ExactTopk, HandTraceRelu) {
  const ScoreMatrix z =
      from_columns(2, {{1, 0}, {0, 1}, {1, 1}, {-1, -1}});
  const std::vector<float> x = {2, 1};
  const TopKSet s = hire::exact_topk(z, x, 2, Activation::kRelu);
  ASSERT_EQ(s.entries.size(), 2u);
  EXPECT_EQ(s.entries[0].index, 2u);
  EXPECT_EQ(s.entries[0].value, 3.0f);
  EXPECT_EQ(s.entries[1].index, 0u);
  EXPECT_EQ(s.entries[1].value, 2.0f);
}

TEST(ExactTopk, ClampFlagged) {
  const ScoreMatrix z = identity3();
  const std::vector<float> x = {1, 2, 3};
  const TopKSet s = hire::exact_topk(z, x, 10, Activation::kIdentity);
  EXPECT_EQ(s.entries.size(), 3u);
  EXPECT_TRUE(s.clamped);
  EXPECT_EQ(s.k, 10u);
}

TEST(TopkSelect, TieBreakAscendingIndex) {
  const std::vector<float> v = {0.5f, 0.25f, 0.25f};
  const TopKSet s = hire::topk_select(v, 2);
  ASSERT_EQ(s.entries.size(), 2u);
  EXPECT_EQ(s.entries[0].index, 0u);
  EXPECT_EQ(s.entries[1].index, 1u);
}

TEST(TopkSelect, TieAtTop) {
  const std::vector<float> v = {5, 7, 7};
  const TopKSet s = hire::topk_select(v, 2);
  ASSERT_EQ(s.entries.size(), 2u);
  EXPECT_EQ(s.entries[0].index, 1u);
  EXPECT_EQ(s.entries[1].index, 2u);
  EXPECT_EQ(s.entries[0].value, 7.0f);
}

TEST(TopkSelect, NegativeValuesRetained) {
  const std::vector<float> v = {-1, -2};
  const TopKSet s = hire::topk_select(v, 2);
  ASSERT_EQ(s.entries.size(), 2u);
  EXPECT_EQ(s.entries[0].value, -1.0f);
  EXPECT_EQ(s.entries[1].value, -2.0f);
}

TEST(TopkSelect, KZeroRejected) {
  EXPECT_THROW(hire::topk_select(std::vector<float>{1.0f}, 0),
               std::invalid_argument);
}

TEST(TopkSelect, MatchesFullSortOracle) {
  hire::Rng rng(11);
  std::vector<float> v(100);
  for (float& f : v) f = rng.next_gaussian_f();
  const TopKSet s = hire::topk_select(v, 10);
  EXPECT_EQ(s.indices(), sort_then_take(v, 10));
}

TEST(TopkSelect, OracleWithTies) {
  hire::Rng rng(12);
  std::vector<float> v(64);
  for (float& f : v) f = static_cast<float>(rng.next_u64() % 5);
  for (std::size_t k = 1; k <= v.size(); k += 7) {
    const TopKSet s = hire::topk_select(v, k);
    EXPECT_EQ(s.indices(), sort_then_take(v, k)) << "k=" << k;
  }
}

// exact_topk(Z, x, k, phi) == topk_select(matvec(Z, x, phi), k), all inputs.
TEST(Invariants, ExactTopkFactorsThroughMatvec) {
  hire::Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 1 + rng.next_u64() % 16;
    const std::size_t l = 1 + rng.next_u64() % 64;
    const std::size_t k = 1 + rng.next_u64() % l;
    const auto phi = static_cast<Activation>(rng.next_u64() % 3);
    ScoreMatrix z(d, l);
    for (std::size_t j = 0; j < l; ++j)
      for (std::size_t i = 0; i < d; ++i) z.at(i, j) = rng.next_gaussian_f();
    std::vector<float> x(d);
    for (float& f : x) f = rng.next_gaussian_f();

    const TopKSet a = hire::exact_topk(z, x, k, phi);
    const TopKSet b = hire::topk_select(hire::matvec(z, x, phi), k);
    EXPECT_EQ(a, b);
  }
}

// Permuting columns of Z permutes result indices accordingly.
TEST(Invariants, ColumnPermutationEquivariance) {
  hire::Rng rng(22);
  const std::size_t d = 6, l = 20, k = 5;
  ScoreMatrix z(d, l);
  for (std::size_t j = 0; j < l; ++j)
    for (std::size_t i = 0; i < d; ++i) z.at(i, j) = rng.next_gaussian_f();
  std::vector<float> x(d);
  for (float& f : x) f = rng.next_gaussian_f();

  std::vector<std::uint32_t> perm(l);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = 0; i + 1 < l; ++i)
    std::swap(perm[i], perm[i + rng.next_u64() % (l - i)]);

  ScoreMatrix zp(d, l);
  for (std::size_t j = 0; j < l; ++j)
    for (std::size_t i = 0; i < d; ++i) zp.at(i, perm[j]) = z.at(i, j);

  const TopKSet s = hire::exact_topk(z, x, k, Activation::kIdentity);
  const TopKSet sp = hire::exact_topk(zp, x, k, Activation::kIdentity);
  // Scores here are distinct with probability one, so the permuted
  // instance must select exactly the permuted indices.
  ASSERT_EQ(s.entries.size(), sp.entries.size());
  for (std::size_t i = 0; i < s.entries.size(); ++i) {
    EXPECT_EQ(perm[s.entries[i].index], sp.entries[i].index);
    EXPECT_EQ(s.entries[i].value, sp.entries[i].value);
  }
}

TEST(Invariants, RepeatedCallsByteIdentical) {
  hire::Rng rng(23);
  const std::size_t d = 8, l = 128;
  ScoreMatrix z(d, l);
  for (std::size_t j = 0; j < l; ++j)
    for (std::size_t i = 0; i < d; ++i) z.at(i, j) = rng.next_gaussian_f();
  std::vector<float> x(d);
  for (float& f : x) f = rng.next_gaussian_f();

  const TopKSet a = hire::exact_topk(z, x, 17, Activation::kSquaredRelu);
  const TopKSet b = hire::exact_topk(z, x, 17, Activation::kSquaredRelu);
  EXPECT_EQ(a, b);
}

TEST(ScoreMatrix, SliceCols) {
  const ScoreMatrix z = from_columns(2, {{1, 2}, {3, 4}, {5, 6}});
  const ScoreMatrix s = z.slice_cols(1, 2);
  EXPECT_EQ(s.rows(), 2u);
  EXPECT_EQ(s.cols(), 2u);
  EXPECT_EQ(s.at(0, 0), 3.0f);
  EXPECT_EQ(s.at(1, 1), 6.0f);
  EXPECT_THROW(z.slice_cols(2, 2), std::invalid_argument);
}

}  // namespace
