#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hire/approx.hpp"
#include "hire/linalg.hpp"

namespace hire {

struct HireConfig {
  std::size_t k = 1;
  std::size_t k_prime = 1;
  Activation phi = Activation::kIdentity;
};

inline void validate(const HireConfig& cfg) {
  if (cfg.k < 1)
    throw std::invalid_argument("HireConfig: k must be >= 1");
  if (cfg.k > cfg.k_prime)
    throw std::invalid_argument("HireConfig: k (" + std::to_string(cfg.k) +
                                ") must be <= k_prime (" +
                                std::to_string(cfg.k_prime) + ")");
}

// The candidate index set S', kept sorted ascending for set arithmetic.
struct CandidateSet {
  std::vector<std::uint32_t> indices;
  ScorerKind origin = ScorerKind::kExactCopy;

  bool contains(std::uint32_t idx) const {
    return std::binary_search(indices.begin(), indices.end(), idx);
  }
};

struct HireResult {
  TopKSet topk;
  CandidateSet candidates;
};

// Approximate top-k' candidate selection, exact recomputation restricted
// to the candidates, final top-k. Values in the result are always exact
// inner products against Z, never approximate scores. If the exact top-k
// indices are contained in S', the result equals exact_topk.
inline HireResult hire_topk(std::span<const float> x, const ScoreMatrix& z,
                            const ApproxScorer& a, const HireConfig& cfg) {
  validate(cfg);
  detail::check_dims(z.rows(), x.size(), "hire_topk");
  if (a.input_dim() != z.rows() || a.output_dim() != z.cols())
    throw std::invalid_argument(
        "hire_topk: scorer is " + std::to_string(a.input_dim()) + "x" +
        std::to_string(a.output_dim()) + " but Z is " +
        std::to_string(z.rows()) + "x" + std::to_string(z.cols()));

  const std::vector<float> approx = a.scores(x, cfg.phi);
  TopKSet candidate_sel = topk_select(approx, cfg.k_prime);

  HireResult result;
  result.candidates.origin = a.kind();
  result.candidates.indices = candidate_sel.indices();
  std::sort(result.candidates.indices.begin(),
            result.candidates.indices.end());

  std::vector<TopKEntry> rescored;
  rescored.reserve(result.candidates.indices.size());
  for (std::uint32_t j : result.candidates.indices)
    rescored.push_back({j, column_score(z, j, x, cfg.phi)});

  const std::size_t take = std::min(cfg.k, rescored.size());
  std::partial_sort(rescored.begin(), rescored.begin() + take, rescored.end(),
                    [](const TopKEntry& p, const TopKEntry& q) {
                      return detail::ranks_before(p.value, p.index, q.value,
                                                  q.index);
                    });
  rescored.resize(take);

  result.topk.entries = std::move(rescored);
  result.topk.k = cfg.k;
  result.topk.clamped = candidate_sel.clamped || take < cfg.k;
  return result;
}

// Numerically stable full softmax over W^T x.
inline std::vector<float> softmax_full(const ScoreMatrix& w,
                                       std::span<const float> x) {
  detail::check_dims(w.rows(), x.size(), "softmax_full");
  if (w.cols() == 0)
    throw std::invalid_argument("softmax_full: W must have >= 1 column");
  std::vector<float> logits = matvec(w, x, Activation::kIdentity);
  float max_logit = logits[0];
  for (float v : logits) max_logit = std::max(max_logit, v);
  double sum = 0.0;
  for (float& v : logits) {
    v = std::exp(v - max_logit);
    sum += v;
  }
  for (float& v : logits) v = static_cast<float>(v / sum);
  return logits;
}

// Renormalized distribution over the retained top-k, entries sorted by
// probability descending (ties by ascending index). Probabilities sum to
// 1 within 1e-6.
struct SparseDistribution {
  std::vector<TopKEntry> entries;  // value = probability

  double total() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.value;
    return s;
  }
};

// HiRE applied to the softmax layer: top-k logits via hire_topk (exact
// values on the candidate set), then the retained exp-logits renormalized
// to sum 1. With an ExactCopy scorer this equals the top-k-conditional of
// the full softmax.
inline SparseDistribution softmax_topk(const ScoreMatrix& w,
                                       std::span<const float> x,
                                       const ApproxScorer& a,
                                       const HireConfig& cfg) {
  if (cfg.phi != Activation::kIdentity)
    throw std::invalid_argument("softmax_topk: phi must be identity");
  const HireResult r = hire_topk(x, w, a, cfg);

  SparseDistribution dist;
  dist.entries.reserve(r.topk.entries.size());
  if (r.topk.entries.empty()) return dist;

  const float max_logit = r.topk.entries.front().value;  // sorted descending
  double sum = 0.0;
  for (const auto& e : r.topk.entries) {
    const double p = std::exp(static_cast<double>(e.value) - max_logit);
    dist.entries.push_back({e.index, static_cast<float>(p)});
    sum += p;
  }
  for (auto& e : dist.entries) e.value = static_cast<float>(e.value / sum);
  return dist;
}

}  // namespace hire
