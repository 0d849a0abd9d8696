#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hire/approx.hpp"
#include "hire/ffn.hpp"
#include "hire/hire.hpp"
#include "hire/linalg.hpp"

namespace hire {

// Column-sharded scorer across s simulated devices. Shards partition
// [0, l) contiguously, near-equal, first (l mod s) shards one wider.
struct Shard {
  ScoreMatrix z;
  ApproxScorer a;
  std::size_t offset = 0;  // global index of the shard's column 0
};

struct ShardedScorer {
  std::vector<Shard> shards;
  std::size_t input_dim = 0;
  std::size_t total_cols = 0;

  std::size_t num_shards() const { return shards.size(); }
};

// Bytes moved for the exact recomputation (32-bit emulation), plus where
// the candidates came from. Every candidate is local to its shard.
struct CommReport {
  std::size_t bytes_gathered = 0;
  std::vector<std::size_t> candidates_per_shard;
  std::size_t values_concatenated = 0;
};

inline ShardedScorer shard(const ScoreMatrix& z, const ApproxScorer& a,
                           std::size_t s) {
  if (s < 1) throw std::invalid_argument("shard: s must be >= 1");
  if (s > z.cols())
    throw std::invalid_argument("shard: s = " + std::to_string(s) +
                                " exceeds l = " + std::to_string(z.cols()));
  if (a.input_dim() != z.rows() || a.output_dim() != z.cols())
    throw std::invalid_argument("shard: scorer shape does not match Z");

  ShardedScorer out;
  out.input_dim = z.rows();
  out.total_cols = z.cols();
  const std::size_t base = z.cols() / s;
  const std::size_t extra = z.cols() % s;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < s; ++i) {
    const std::size_t width = base + (i < extra ? 1 : 0);
    out.shards.push_back(
        {z.slice_cols(offset, width), a.slice_cols(offset, width), offset});
    offset += width;
  }
  return out;
}

struct DaTopkResult {
  TopKSet topk;
  CommReport comm;
};

// DA-TOP-k: per shard, top-(k'/s) approximate candidates and top-(k/s)
// exact values; the per-shard results are concatenated and re-sorted
// globally. Every returned value is exact against the unsharded Z.
inline DaTopkResult da_topk(const ShardedScorer& sh, std::span<const float> x,
                            const HireConfig& cfg) {
  validate(cfg);
  detail::check_dims(sh.input_dim, x.size(), "da_topk");
  const std::size_t s = sh.num_shards();
  if (s == 0) throw std::invalid_argument("da_topk: no shards");
  if (cfg.k % s != 0)
    throw std::invalid_argument("da_topk: s = " + std::to_string(s) +
                                " must divide k = " + std::to_string(cfg.k));
  if (cfg.k_prime % s != 0)
    throw std::invalid_argument("da_topk: s = " + std::to_string(s) +
                                " must divide k_prime = " +
                                std::to_string(cfg.k_prime));
  const std::size_t k_local = cfg.k / s;
  const std::size_t kp_local = cfg.k_prime / s;

  DaTopkResult result;
  result.topk.k = cfg.k;
  std::vector<TopKEntry> pooled;
  pooled.reserve(cfg.k);

  for (const Shard& shard_i : sh.shards) {
    const std::size_t width = shard_i.z.cols();
    if (k_local > width)
      throw std::invalid_argument(
          "da_topk: per-shard quota k/s = " + std::to_string(k_local) +
          " exceeds shard width " + std::to_string(width));

    const std::vector<float> approx = shard_i.a.scores(x, cfg.phi);
    const TopKSet cand = topk_select(approx, kp_local);
    if (cand.clamped) result.topk.clamped = true;

    std::vector<std::uint32_t> local = cand.indices();
    std::sort(local.begin(), local.end());
    std::vector<TopKEntry> rescored;
    rescored.reserve(local.size());
    for (std::uint32_t j : local)
      rescored.push_back({static_cast<std::uint32_t>(shard_i.offset + j),
                          column_score(shard_i.z, j, x, cfg.phi)});

    const std::size_t take = std::min(k_local, rescored.size());
    std::partial_sort(rescored.begin(), rescored.begin() + take,
                      rescored.end(),
                      [](const TopKEntry& p, const TopKEntry& q) {
                        return detail::ranks_before(p.value, p.index, q.value,
                                                    q.index);
                      });
    rescored.resize(take);
    pooled.insert(pooled.end(), rescored.begin(), rescored.end());

    result.comm.candidates_per_shard.push_back(local.size());
    result.comm.bytes_gathered += local.size() * sh.input_dim * 4;
  }

  std::sort(pooled.begin(), pooled.end(),
            [](const TopKEntry& p, const TopKEntry& q) {
              return detail::ranks_before(p.value, p.index, q.value, q.index);
            });
  result.topk.entries = std::move(pooled);
  result.comm.values_concatenated = result.topk.entries.size();
  return result;
}

struct DaGroupSparseResult {
  std::vector<float> output;
  GroupIndexSet selected;
  std::vector<std::size_t> groups_per_shard;
};

// Group-sparse selection with the FFN's groups sharded contiguously over s
// devices and per-shard quotas of k/(s*g) groups. Output is the exact FFN
// sum restricted to the union of the per-shard selections.
inline DaGroupSparseResult da_group_sparse(const GroupedFFN& f,
                                           std::span<const float> x,
                                           const ApproxScorer& a,
                                           std::size_t k, std::size_t k_prime,
                                           std::size_t s) {
  validate(f);
  detail::check_group_divisible(f, k, k_prime);
  if (s < 1) throw std::invalid_argument("da_group_sparse: s must be >= 1");
  const std::size_t total_groups = f.num_groups();
  if (s > total_groups)
    throw std::invalid_argument("da_group_sparse: s = " + std::to_string(s) +
                                " exceeds group count " +
                                std::to_string(total_groups));
  if ((k / f.group_size) % s != 0)
    throw std::invalid_argument(
        "da_group_sparse: s = " + std::to_string(s) +
        " must divide the group quota k/g = " +
        std::to_string(k / f.group_size));
  if ((k_prime / f.group_size) % s != 0)
    throw std::invalid_argument(
        "da_group_sparse: s = " + std::to_string(s) +
        " must divide the candidate quota k_prime/g = " +
        std::to_string(k_prime / f.group_size));
  const std::size_t k_groups_local = k / f.group_size / s;
  const std::size_t kp_groups_local = k_prime / f.group_size / s;

  DaGroupSparseResult result;
  const std::size_t base = total_groups / s;
  const std::size_t extra = total_groups % s;
  std::size_t first_group = 0;
  for (std::size_t i = 0; i < s; ++i) {
    const std::size_t width = base + (i < extra ? 1 : 0);
    if (k_groups_local > width)
      throw std::invalid_argument(
          "da_group_sparse: per-shard quota " +
          std::to_string(k_groups_local) + " exceeds shard group count " +
          std::to_string(width));

    // Shard-local view: slice the approximation to the shard's units and
    // select with the shard's own quotas. Candidate quotas wider than the
    // shard clamp, matching da_topk.
    GroupedFFN local{
        f.u.slice_cols(first_group * f.group_size, width * f.group_size),
        f.v.slice_cols(first_group * f.group_size, width * f.group_size),
        f.group_size, f.phi};
    const ApproxScorer a_local =
        a.slice_cols(first_group * f.group_size, width * f.group_size);
    const std::size_t kp_local = std::min(kp_groups_local, width);
    const GroupIndexSet sel =
        select_groups(local, x, a_local, k_groups_local * f.group_size,
                      kp_local * f.group_size);

    result.groups_per_shard.push_back(sel.ids.size());
    for (std::uint32_t g : sel.ids)
      result.selected.ids.push_back(
          static_cast<std::uint32_t>(first_group + g));
    first_group += width;
  }
  std::sort(result.selected.ids.begin(), result.selected.ids.end());
  result.output = ffn_apply_groups(f, x, result.selected);
  return result;
}

}  // namespace hire
