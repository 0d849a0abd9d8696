#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hire {

// Numerical failure (non-convergence, degenerate draw), distinct from
// contract violations so callers can map it to its own exit code.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Activation : std::uint8_t { kIdentity, kRelu, kSquaredRelu };

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kSquaredRelu: return "squared-relu";
  }
  return "?";
}

inline float apply_activation(Activation a, float z) {
  switch (a) {
    case Activation::kIdentity: return z;
    case Activation::kRelu: return z > 0.0f ? z : 0.0f;
    case Activation::kSquaredRelu: return z > 0.0f ? z * z : 0.0f;
  }
  return z;
}

// Dense column-major matrix of 32-bit reals. Column j is contiguous, so
// single columns and contiguous column groups are extractable in O(rows).
// Zero columns are permitted only so degenerate FFN parts (m1 = 0) have a
// representation; every scoring operation requires cols >= 1.
class ScoreMatrix {
 public:
  ScoreMatrix() = default;

  ScoreMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), values_(rows * cols, 0.0f) {
    if (rows == 0) throw std::invalid_argument("ScoreMatrix: rows must be >= 1");
  }

  ScoreMatrix(std::size_t rows, std::size_t cols, std::vector<float> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (rows == 0) throw std::invalid_argument("ScoreMatrix: rows must be >= 1");
    if (values_.size() != rows * cols)
      throw std::invalid_argument("ScoreMatrix: values size " +
                                  std::to_string(values_.size()) + " != " +
                                  std::to_string(rows * cols));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  float& at(std::size_t i, std::size_t j) { return values_[j * rows_ + i]; }
  float at(std::size_t i, std::size_t j) const { return values_[j * rows_ + i]; }

  std::span<const float> col(std::size_t j) const {
    return std::span<const float>(values_.data() + j * rows_, rows_);
  }
  std::span<float> col(std::size_t j) {
    return std::span<float>(values_.data() + j * rows_, rows_);
  }

  const std::vector<float>& values() const { return values_; }
  std::vector<float>& values() { return values_; }

  ScoreMatrix slice_cols(std::size_t first, std::size_t count) const {
    if (first + count > cols_)
      throw std::invalid_argument("ScoreMatrix::slice_cols: out of range");
    std::vector<float> v(values_.begin() + first * rows_,
                         values_.begin() + (first + count) * rows_);
    return ScoreMatrix(rows_, count, std::move(v));
  }

 private:
  std::size_t rows_ = 1;
  std::size_t cols_ = 0;
  std::vector<float> values_;
};

struct TopKEntry {
  std::uint32_t index = 0;
  float value = 0.0f;

  friend bool operator==(const TopKEntry&, const TopKEntry&) = default;
};

// The (index, value) pairs of a top-k selection, sorted by value
// descending, ties broken by ascending index. |entries| = min(k, l);
// `clamped` records that k exceeded the number of scores.
struct TopKSet {
  std::vector<TopKEntry> entries;
  std::size_t k = 0;
  bool clamped = false;

  std::vector<std::uint32_t> indices() const {
    std::vector<std::uint32_t> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.index);
    return out;
  }

  friend bool operator==(const TopKSet&, const TopKSet&) = default;
};

namespace detail {

inline void check_dims(std::size_t matrix_rows, std::size_t x_dim,
                       const char* op) {
  if (matrix_rows != x_dim)
    throw std::invalid_argument(std::string(op) + ": matrix has " +
                                std::to_string(matrix_rows) +
                                " rows but x has dim " + std::to_string(x_dim));
}

// Ordering shared by every selection in the library: value descending,
// index ascending on ties.
inline bool ranks_before(float va, std::uint32_t ia, float vb,
                         std::uint32_t ib) {
  if (va != vb) return va > vb;
  return ia < ib;
}

}  // namespace detail

// phi(<z_j, x>) with fixed ascending-row summation order. Both the full
// matvec and every restricted recomputation go through this, which is what
// makes oracle comparisons byte-exact.
inline float column_score(const ScoreMatrix& z, std::size_t j,
                          std::span<const float> x, Activation phi) {
  const std::span<const float> c = z.col(j);
  float acc = 0.0f;
  for (std::size_t i = 0; i < c.size(); ++i) acc += c[i] * x[i];
  return apply_activation(phi, acc);
}

inline std::vector<float> matvec(const ScoreMatrix& z, std::span<const float> x,
                                 Activation phi) {
  detail::check_dims(z.rows(), x.size(), "matvec");
  std::vector<float> out(z.cols());
  for (std::size_t j = 0; j < z.cols(); ++j) out[j] = column_score(z, j, x, phi);
  return out;
}

// Top-k of a precomputed score vector. k > dim clamps and flags.
inline TopKSet topk_select(std::span<const float> v, std::size_t k) {
  if (k == 0) throw std::invalid_argument("topk_select: k must be >= 1");
  TopKSet result;
  result.k = k;
  if (k > v.size()) {
    k = v.size();
    result.clamped = true;
  }
  std::vector<TopKEntry> order(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    order[i] = {static_cast<std::uint32_t>(i), v[i]};
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [](const TopKEntry& a, const TopKEntry& b) {
                      return detail::ranks_before(a.value, a.index, b.value,
                                                  b.index);
                    });
  order.resize(k);
  result.entries = std::move(order);
  return result;
}

inline TopKSet topk_select(const std::vector<float>& v, std::size_t k) {
  return topk_select(std::span<const float>(v), k);
}

// Exact top-k of phi(Z^T x); the ground truth every approximate path is
// measured against.
inline TopKSet exact_topk(const ScoreMatrix& z, std::span<const float> x,
                          std::size_t k, Activation phi) {
  detail::check_dims(z.rows(), x.size(), "exact_topk");
  return topk_select(matvec(z, x, phi), k);
}

}  // namespace hire
