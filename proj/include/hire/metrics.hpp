#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hire/ffn.hpp"
#include "hire/hire.hpp"
#include "hire/linalg.hpp"

namespace hire {

// Recall of the exact top-k index set within the candidate set, computed
// over index sets only.
struct RecallReport {
  double recall = 0.0;          // |S intersect S'| / |S|
  std::size_t intersection_k = 0;
  bool top1_agree = false;
};

inline RecallReport recall(const CandidateSet& candidates,
                           const TopKSet& exact) {
  RecallReport r;
  if (exact.entries.empty()) return r;
  std::size_t hit = 0;
  for (const auto& e : exact.entries)
    if (candidates.contains(e.index)) ++hit;
  r.intersection_k = hit;
  r.recall = static_cast<double>(hit) / exact.entries.size();
  r.top1_agree = candidates.contains(exact.entries.front().index);
  return r;
}

// Parameter bytes moved per query, a latency proxy for memory-bound
// decoding. Baseline
// stores Z in bf16 (2 bytes), the quantized paths store int4 codes
// (half a byte, rounded up to whole bytes), and every HiRE variant
// additionally gathers k' exact bf16 columns.
struct CostReport {
  std::uint64_t bytes_baseline = 0;
  std::uint64_t bytes_lr = 0;
  std::uint64_t bytes_q = 0;
  std::uint64_t bytes_lrq = 0;
  bool lr_no_saving = false;
  bool q_no_saving = false;
  bool lrq_no_saving = false;
};

inline CostReport param_bytes(std::uint64_t d, std::uint64_t l,
                              std::uint64_t r, std::uint64_t k_prime) {
  if (d < 1 || l < 1 || r < 1)
    throw std::invalid_argument("param_bytes: dims must be positive");
  CostReport c;
  c.bytes_baseline = 2 * d * l;
  c.bytes_lr = 2 * (d * r + r * l + d * k_prime);
  c.bytes_q = (d * l + 1) / 2 + 2 * d * k_prime;
  c.bytes_lrq = (d * r + r * l + 1) / 2 + 2 * d * k_prime;
  c.lr_no_saving = c.bytes_lr >= c.bytes_baseline;
  c.q_no_saving = c.bytes_q >= c.bytes_baseline;
  c.lrq_no_saving = c.bytes_lrq >= c.bytes_baseline;
  return c;
}

// |union| / (s * k_groups) over per-sample group selections; 1/s when all
// samples select the same groups, 1 when all selections are disjoint.
inline double overlap_ratio(const std::vector<GroupIndexSet>& per_sample_sets,
                            std::size_t k_groups) {
  if (per_sample_sets.empty())
    throw std::invalid_argument("overlap_ratio: no sample sets");
  if (k_groups < 1)
    throw std::invalid_argument("overlap_ratio: k_groups must be >= 1");
  std::vector<std::uint32_t> merged;
  for (const auto& s : per_sample_sets) {
    if (s.ids.size() != k_groups)
      throw std::invalid_argument(
          "overlap_ratio: sample selected " + std::to_string(s.ids.size()) +
          " groups, expected " + std::to_string(k_groups));
    std::vector<std::uint32_t> next;
    next.reserve(merged.size() + s.ids.size());
    std::set_union(merged.begin(), merged.end(), s.ids.begin(), s.ids.end(),
                   std::back_inserter(next));
    merged = std::move(next);
  }
  return static_cast<double>(merged.size()) /
         (static_cast<double>(per_sample_sets.size()) * k_groups);
}

}  // namespace hire
