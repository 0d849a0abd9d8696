#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "hire/rng.hpp"

namespace hire {

// Microbenchmark for the memory-transfer cost of gathering a random subset
// of column groups from a large buffer, versus a dense copy of the same
// byte count. The buffer is n_groups groups of g vectors of dimension d.
struct GatherBenchConfig {
  std::size_t n_groups = 4096;
  std::size_t g = 8;
  std::size_t d = 128;
  double fraction_selected = 0.25;
  std::size_t repeats = 9;
  std::uint64_t seed = 0;
};

inline void validate(const GatherBenchConfig& cfg) {
  if (cfg.n_groups < 1 || cfg.g < 1 || cfg.d < 1)
    throw std::invalid_argument("GatherBenchConfig: dims must be >= 1");
  if (!(cfg.fraction_selected > 0.0) || cfg.fraction_selected > 1.0)
    throw std::invalid_argument(
        "GatherBenchConfig: fraction_selected must be in (0, 1]");
  if (cfg.repeats < 3)
    throw std::invalid_argument("GatherBenchConfig: repeats must be >= 3");
}

struct GatherBenchResult {
  double sparse_ns = 0.0;  // median over repeats
  double dense_ns = 0.0;
  double efficiency_paper = 0.0;  // sparse / dense
  double efficiency_ratio = 0.0;  // dense / sparse
  std::size_t bytes_moved = 0;    // identical for both paths
  std::size_t groups_selected = 0;
  bool checksum_ok = false;
};

namespace detail {

inline void timer_barrier() { asm volatile("" ::: "memory"); }

inline std::uint64_t buffer_checksum(const float* data, std::size_t n) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, data + i, sizeof(bits));
    h = (h ^ bits) * 0x100000001B3ULL;
  }
  return h;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

inline GatherBenchResult run_gather_bench(const GatherBenchConfig& cfg) {
  validate(cfg);
  using clock = std::chrono::steady_clock;

  const std::size_t group_elems = cfg.g * cfg.d;
  const std::size_t total_elems = cfg.n_groups * group_elems;
  std::vector<float> src(total_elems);
  Rng rng(cfg.seed);
  for (float& v : src) v = rng.next_gaussian_f();

  const std::size_t n_sel = static_cast<std::size_t>(
      std::ceil(cfg.fraction_selected * static_cast<double>(cfg.n_groups)));

  // Seeded partial Fisher-Yates; selections stay in draw order so the
  // access pattern is non-contiguous.
  std::vector<std::uint32_t> ids(cfg.n_groups);
  for (std::size_t i = 0; i < cfg.n_groups; ++i)
    ids[i] = static_cast<std::uint32_t>(i);
  for (std::size_t i = 0; i < n_sel; ++i) {
    const std::size_t j = i + rng.next_u64() % (cfg.n_groups - i);
    std::swap(ids[i], ids[j]);
  }
  ids.resize(n_sel);

  const std::size_t sel_elems = n_sel * group_elems;
  std::vector<float> dst(sel_elems, 0.0f);

  auto run_sparse = [&]() {
    for (std::size_t i = 0; i < n_sel; ++i)
      std::memcpy(dst.data() + i * group_elems,
                  src.data() + std::size_t(ids[i]) * group_elems,
                  group_elems * sizeof(float));
  };
  auto run_dense = [&]() {
    std::memcpy(dst.data(), src.data(), sel_elems * sizeof(float));
  };

  std::vector<double> sparse_times, dense_times;
  run_sparse();  // warm-up, discarded
  for (std::size_t rep = 0; rep < cfg.repeats; ++rep) {
    detail::timer_barrier();
    const auto t0 = clock::now();
    run_sparse();
    detail::timer_barrier();
    const auto t1 = clock::now();
    sparse_times.push_back(
        std::chrono::duration<double, std::nano>(t1 - t0).count());
  }

  // Verify the gather before the buffer is reused by the dense baseline.
  std::uint64_t gathered = 0, expected = 0;
  for (std::size_t i = 0; i < n_sel; ++i) {
    gathered = gathered * 31 +
               detail::buffer_checksum(dst.data() + i * group_elems,
                                       group_elems);
    expected = expected * 31 +
               detail::buffer_checksum(
                   src.data() + std::size_t(ids[i]) * group_elems,
                   group_elems);
  }
  const bool checksum_ok = gathered == expected;

  run_dense();  // warm-up, discarded
  for (std::size_t rep = 0; rep < cfg.repeats; ++rep) {
    detail::timer_barrier();
    const auto t0 = clock::now();
    run_dense();
    detail::timer_barrier();
    const auto t1 = clock::now();
    dense_times.push_back(
        std::chrono::duration<double, std::nano>(t1 - t0).count());
  }

  GatherBenchResult r;
  r.sparse_ns = detail::median(std::move(sparse_times));
  r.dense_ns = detail::median(std::move(dense_times));
  r.efficiency_paper = r.sparse_ns / r.dense_ns;
  r.efficiency_ratio = r.dense_ns / r.sparse_ns;
  r.bytes_moved = sel_elems * sizeof(float);
  r.groups_selected = n_sel;
  r.checksum_ok = checksum_ok;
  return r;
}

}  // namespace hire
