#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hire/approx.hpp"
#include "hire/io.hpp"
#include "hire/linalg.hpp"

namespace hire {

// Two-layer FFN: output = sum_j phi(<u_j, x>) v_j. Hidden units are tiled
// into contiguous groups [j*g, (j+1)*g) for the group-sparse paths.
struct GroupedFFN {
  ScoreMatrix u;  // d x m, first layer
  ScoreMatrix v;  // d x m, second layer
  std::size_t group_size = 1;
  Activation phi = Activation::kRelu;

  std::size_t dim() const { return u.rows(); }
  std::size_t hidden() const { return u.cols(); }
  std::size_t num_groups() const { return hidden() / group_size; }
};

inline void validate(const GroupedFFN& f) {
  if (f.u.rows() != f.v.rows() || f.u.cols() != f.v.cols())
    throw std::invalid_argument("GroupedFFN: U and V must both be d x m");
  if (f.group_size < 1)
    throw std::invalid_argument("GroupedFFN: group size must be >= 1");
  if (f.hidden() % f.group_size != 0)
    throw std::invalid_argument("GroupedFFN: g = " +
                                std::to_string(f.group_size) +
                                " must divide m = " +
                                std::to_string(f.hidden()));
}

// Hybrid layer: m1 units evaluated densely for every input, m2 units
// group-sparse. m1 may be zero.
struct CommonPathFFN {
  GroupedFFN dense_part;
  GroupedFFN sparse_part;
};

inline void validate(const CommonPathFFN& c) {
  validate(c.dense_part);
  validate(c.sparse_part);
  if (c.dense_part.dim() != c.sparse_part.dim())
    throw std::invalid_argument("CommonPathFFN: parts disagree on d");
  if (c.sparse_part.hidden() < c.sparse_part.group_size)
    throw std::invalid_argument("CommonPathFFN: sparse part needs m2 >= g");
}

// Sorted unique group ids.
struct GroupIndexSet {
  std::vector<std::uint32_t> ids;

  friend bool operator==(const GroupIndexSet&, const GroupIndexSet&) = default;
};

inline std::vector<float> ffn_dense(const GroupedFFN& f,
                                    std::span<const float> x) {
  validate(f);
  detail::check_dims(f.dim(), x.size(), "ffn_dense");
  std::vector<float> out(f.dim(), 0.0f);
  for (std::size_t j = 0; j < f.hidden(); ++j) {
    const float act = column_score(f.u, j, x, f.phi);
    const auto vj = f.v.col(j);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += act * vj[i];
  }
  return out;
}

// Sum restricted to the exact top-k activations of phi(U^T x).
inline std::vector<float> ffn_topk(const GroupedFFN& f,
                                   std::span<const float> x, std::size_t k) {
  validate(f);
  detail::check_dims(f.dim(), x.size(), "ffn_topk");
  if (k < 1 || k > f.hidden())
    throw std::invalid_argument("ffn_topk: k = " + std::to_string(k) +
                                " outside [1, m = " +
                                std::to_string(f.hidden()) + "]");
  const TopKSet sel = exact_topk(f.u, x, k, f.phi);
  std::vector<std::uint32_t> chosen = sel.indices();
  std::sort(chosen.begin(), chosen.end());

  std::vector<float> out(f.dim(), 0.0f);
  for (std::uint32_t j : chosen) {
    const float act = column_score(f.u, j, x, f.phi);
    const auto vj = f.v.col(j);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += act * vj[i];
  }
  return out;
}

// Group proxy Phi: per group, the sum of |phi(score)| over its units,
// scored through the approximation.
inline std::vector<float> group_proxy(const GroupedFFN& f,
                                      std::span<const float> x,
                                      const ApproxScorer& a) {
  validate(f);
  detail::check_dims(f.dim(), x.size(), "group_proxy");
  if (a.output_dim() != f.hidden())
    throw std::invalid_argument("group_proxy: scorer covers " +
                                std::to_string(a.output_dim()) +
                                " units but FFN has " +
                                std::to_string(f.hidden()));
  const std::vector<float> scores = a.scores(x, f.phi);
  std::vector<float> proxy(f.num_groups(), 0.0f);
  for (std::size_t j = 0; j < f.num_groups(); ++j) {
    float acc = 0.0f;
    for (std::size_t t = 0; t < f.group_size; ++t)
      acc += std::fabs(scores[j * f.group_size + t]);
    proxy[j] = acc;
  }
  return proxy;
}

namespace detail {

inline float exact_group_proxy(const GroupedFFN& f, std::span<const float> x,
                               std::size_t group) {
  float acc = 0.0f;
  for (std::size_t t = 0; t < f.group_size; ++t)
    acc += std::fabs(column_score(f.u, group * f.group_size + t, x, f.phi));
  return acc;
}

inline void check_group_divisible(const GroupedFFN& f, std::size_t k,
                                  std::size_t k_prime) {
  if (k < 1 || k % f.group_size != 0)
    throw std::invalid_argument("ffn_group_sparse: g = " +
                                std::to_string(f.group_size) +
                                " must divide k = " + std::to_string(k));
  if (k_prime % f.group_size != 0)
    throw std::invalid_argument("ffn_group_sparse: g = " +
                                std::to_string(f.group_size) +
                                " must divide k_prime = " +
                                std::to_string(k_prime));
  if (k > k_prime || k_prime > f.hidden())
    throw std::invalid_argument(
        "ffn_group_sparse: need k <= k_prime <= m, got k = " +
        std::to_string(k) + ", k_prime = " + std::to_string(k_prime) +
        ", m = " + std::to_string(f.hidden()));
}

}  // namespace detail

// Exact FFN sum restricted to the given groups (used by the union path).
inline std::vector<float> ffn_apply_groups(const GroupedFFN& f,
                                           std::span<const float> x,
                                           const GroupIndexSet& groups) {
  validate(f);
  detail::check_dims(f.dim(), x.size(), "ffn_apply_groups");
  std::vector<float> out(f.dim(), 0.0f);
  for (std::uint32_t j : groups.ids) {
    if (j >= f.num_groups())
      throw std::invalid_argument("ffn_apply_groups: group id out of range");
    for (std::size_t t = 0; t < f.group_size; ++t) {
      const std::size_t unit = j * f.group_size + t;
      const float act = column_score(f.u, unit, x, f.phi);
      const auto vu = f.v.col(unit);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += act * vu[i];
    }
  }
  return out;
}

// Stage 1: top-(k'/g) candidate groups by the approximate proxy.
// Stage 2: top-(k/g) of the candidates, re-ranked by the exact proxy.
inline GroupIndexSet select_groups(const GroupedFFN& f,
                                   std::span<const float> x,
                                   const ApproxScorer& a, std::size_t k,
                                   std::size_t k_prime) {
  detail::check_group_divisible(f, k, k_prime);
  const std::vector<float> proxy = group_proxy(f, x, a);
  const TopKSet candidates = topk_select(proxy, k_prime / f.group_size);

  std::vector<TopKEntry> exact;
  exact.reserve(candidates.entries.size());
  for (const auto& e : candidates.entries)
    exact.push_back({e.index, detail::exact_group_proxy(f, x, e.index)});

  const std::size_t take = std::min(k / f.group_size, exact.size());
  std::partial_sort(exact.begin(), exact.begin() + take, exact.end(),
                    [](const TopKEntry& p, const TopKEntry& q) {
                      return detail::ranks_before(p.value, p.index, q.value,
                                                  q.index);
                    });
  exact.resize(take);

  GroupIndexSet out;
  out.ids.reserve(take);
  for (const auto& e : exact) out.ids.push_back(e.index);
  std::sort(out.ids.begin(), out.ids.end());
  return out;
}

struct GroupSparseResult {
  std::vector<float> output;
  GroupIndexSet selected;
};

// Group-sparse FFN: approximate candidate groups, exact re-rank, exact
// restricted sum. The final values are always exact inner products; the
// approximation only decides which groups participate.
inline GroupSparseResult ffn_group_sparse(const GroupedFFN& f,
                                          std::span<const float> x,
                                          const ApproxScorer& a, std::size_t k,
                                          std::size_t k_prime) {
  GroupSparseResult r;
  r.selected = select_groups(f, x, a, k, k_prime);
  r.output = ffn_apply_groups(f, x, r.selected);
  return r;
}

// Dense common path plus group-sparse remainder. The scorer approximates
// the sparse part's first layer only.
inline std::vector<float> ffn_common_path(const CommonPathFFN& c,
                                          std::span<const float> x,
                                          const ApproxScorer& a, std::size_t k,
                                          std::size_t k_prime) {
  validate(c);
  std::vector<float> out(c.dense_part.dim(), 0.0f);
  if (c.dense_part.hidden() > 0) out = ffn_dense(c.dense_part, x);
  const GroupSparseResult sparse =
      ffn_group_sparse(c.sparse_part, x, a, k, k_prime);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += sparse.output[i];
  return out;
}

// Dynamic overlap: union of the per-sample final selections.
inline GroupIndexSet union_group_select(const GroupedFFN& f,
                                        std::span<const std::vector<float>> xs,
                                        const ApproxScorer& a, std::size_t k,
                                        std::size_t k_prime) {
  if (xs.empty())
    throw std::invalid_argument("union_group_select: no input samples");
  GroupIndexSet result;
  for (const auto& x : xs) {
    const GroupIndexSet sel = select_groups(f, x, a, k, k_prime);
    std::vector<std::uint32_t> merged;
    merged.reserve(result.ids.size() + sel.ids.size());
    std::set_union(result.ids.begin(), result.ids.end(), sel.ids.begin(),
                   sel.ids.end(), std::back_inserter(merged));
    result.ids = std::move(merged);
  }
  return result;
}

// --- HIRF file format ---------------------------------------------------
// One record per GroupedFFN; a common-path bundle is two records, dense
// part first (its m1 field set to its own unit count).

inline void write_ffn_record(std::ostream& os, const GroupedFFN& f,
                             std::size_t m1) {
  detail::put_magic(os, "HIRF");
  detail::put_u32(os, static_cast<std::uint32_t>(f.dim()));
  detail::put_u32(os, static_cast<std::uint32_t>(f.hidden()));
  detail::put_u32(os, static_cast<std::uint32_t>(f.group_size));
  detail::put_u32(os, static_cast<std::uint32_t>(m1));
  detail::put_f32_block(os, f.u.values());
  detail::put_f32_block(os, f.v.values());
}

inline void write_ffn(std::ostream& os, const GroupedFFN& f) {
  write_ffn_record(os, f, 0);
}

inline void write_common_path(std::ostream& os, const CommonPathFFN& c) {
  write_ffn_record(os, c.dense_part, c.dense_part.hidden());
  write_ffn_record(os, c.sparse_part, 0);
}

inline GroupedFFN read_ffn_record(std::istream& is, std::size_t* m1_out,
                                  Activation phi) {
  detail::expect_magic(is, "HIRF");
  const std::uint32_t d = detail::get_u32(is);
  const std::uint32_t m = detail::get_u32(is);
  const std::uint32_t g = detail::get_u32(is);
  const std::uint32_t m1 = detail::get_u32(is);
  if (m1_out) *m1_out = m1;
  GroupedFFN f;
  f.u = ScoreMatrix(d, m, detail::get_f32_block(is, std::size_t(d) * m));
  f.v = ScoreMatrix(d, m, detail::get_f32_block(is, std::size_t(d) * m));
  f.group_size = g;
  f.phi = phi;
  validate(f);
  return f;
}

inline GroupedFFN read_ffn(std::istream& is, Activation phi) {
  return read_ffn_record(is, nullptr, phi);
}

inline CommonPathFFN read_common_path(std::istream& is, Activation phi) {
  CommonPathFFN c;
  std::size_t m1 = 0;
  c.dense_part = read_ffn_record(is, &m1, phi);
  c.sparse_part = read_ffn_record(is, nullptr, phi);
  validate(c);
  return c;
}

}  // namespace hire
