#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hire/linalg.hpp"
#include "hire/rng.hpp"

namespace hire {

enum class Spectrum : std::uint8_t { kFlat, kDecaying };

inline std::vector<float> gen_vector(std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(dim);
  for (float& x : v) x = rng.next_gaussian_f();
  return v;
}

namespace detail {

// Orthonormal columns from a seeded Gaussian draw, modified Gram-Schmidt
// in double. cols <= rows required.
inline std::vector<std::vector<double>> orthonormal_columns(std::size_t rows,
                                                            std::size_t cols,
                                                            Rng& rng) {
  std::vector<std::vector<double>> q(cols, std::vector<double>(rows));
  for (std::size_t c = 0; c < cols; ++c) {
    for (int attempt = 0;; ++attempt) {
      for (std::size_t i = 0; i < rows; ++i) q[c][i] = rng.next_gaussian();
      for (std::size_t p = 0; p < c; ++p) {
        double proj = 0.0;
        for (std::size_t i = 0; i < rows; ++i) proj += q[c][i] * q[p][i];
        for (std::size_t i = 0; i < rows; ++i) q[c][i] -= proj * q[p][i];
      }
      double norm = 0.0;
      for (double x : q[c]) norm += x * x;
      norm = std::sqrt(norm);
      if (norm > 1e-8) {
        for (std::size_t i = 0; i < rows; ++i) q[c][i] /= norm;
        break;
      }
      if (attempt > 16)
        throw NumericError("orthonormal_columns: degenerate draw");
    }
  }
  return q;
}

}  // namespace detail

// Flat: iid standard Gaussian entries, near-flat singular spectrum.
// Decaying: exact singular values sigma_i = 1/i on random orthonormal
// factors, so low-rank fits are meaningfully better than random sketches.
inline ScoreMatrix gen_instance(std::size_t d, std::size_t l,
                                std::uint64_t seed, Spectrum spectrum) {
  if (d < 1 || l < 1)
    throw std::invalid_argument("gen_instance: dims must be positive");
  Rng rng(seed);
  if (spectrum == Spectrum::kFlat) {
    ScoreMatrix z(d, l);
    for (std::size_t j = 0; j < l; ++j)
      for (std::size_t i = 0; i < d; ++i) z.at(i, j) = rng.next_gaussian_f();
    return z;
  }

  const std::size_t rank = std::min(d, l);
  const auto left = detail::orthonormal_columns(d, rank, rng);
  const auto right = detail::orthonormal_columns(l, rank, rng);
  ScoreMatrix z(d, l);
  for (std::size_t j = 0; j < l; ++j) {
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t q = 0; q < rank; ++q)
        acc += left[q][i] * right[q][j] / static_cast<double>(q + 1);
      z.at(i, j) = static_cast<float>(acc);
    }
  }
  return z;
}

}  // namespace hire
