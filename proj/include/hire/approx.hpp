#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "hire/io.hpp"
#include "hire/linalg.hpp"
#include "hire/rng.hpp"

namespace hire {

// Rank-r factorization Z_approx = Z1 * Z2^T, never materialized densely.
// Z1 is d x r, Z2 is l x r.
struct LowRankApprox {
  ScoreMatrix z1;
  ScoreMatrix z2;
  std::size_t rank = 0;
};

// Per-column symmetric int4: dequantized entry = code * scale, codes in
// {-7..7}, scale[j] = max_i |Z[i,j]| / 7 (1 for an all-zero column).
struct QuantizedMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int8_t> codes;  // column-major, one code per entry
  std::vector<float> scales;       // one per column

  float entry(std::size_t i, std::size_t j) const {
    return static_cast<float>(codes[j * rows + i]) * scales[j];
  }
};

namespace detail {

inline std::int8_t round_half_away(float v) {
  const float r = v >= 0.0f ? std::floor(v + 0.5f) : std::ceil(v - 0.5f);
  const int c = static_cast<int>(r);
  return static_cast<std::int8_t>(c < -7 ? -7 : (c > 7 ? 7 : c));
}

}  // namespace detail

inline QuantizedMatrix quantize_int4(const ScoreMatrix& z) {
  QuantizedMatrix q;
  q.rows = z.rows();
  q.cols = z.cols();
  q.codes.resize(q.rows * q.cols);
  q.scales.resize(q.cols);
  for (std::size_t j = 0; j < q.cols; ++j) {
    const auto c = z.col(j);
    float max_abs = 0.0f;
    for (float v : c) max_abs = std::max(max_abs, std::fabs(v));
    const float scale = max_abs > 0.0f ? max_abs / 7.0f : 1.0f;
    q.scales[j] = scale;
    for (std::size_t i = 0; i < q.rows; ++i)
      q.codes[j * q.rows + i] = detail::round_half_away(c[i] / scale);
  }
  return q;
}

inline ScoreMatrix dequantize(const QuantizedMatrix& q) {
  ScoreMatrix z(q.rows, q.cols);
  for (std::size_t j = 0; j < q.cols; ++j)
    for (std::size_t i = 0; i < q.rows; ++i) z.at(i, j) = q.entry(i, j);
  return z;
}

// bf16 emulation: round-to-nearest-even to the high 16 bits of the f32
// pattern, result widened back to f32. Idempotent.
inline float round_bf16(float f) {
  std::uint32_t u = std::bit_cast<std::uint32_t>(f);
  if ((u & 0x7F800000u) == 0x7F800000u) return f;  // inf/nan pass through
  u += 0x7FFFu + ((u >> 16) & 1u);
  return std::bit_cast<float>(u & 0xFFFF0000u);
}

inline std::vector<float> round_bf16(std::span<const float> v) {
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = round_bf16(v[i]);
  return out;
}

inline std::vector<float> round_bf16(const std::vector<float>& v) {
  return round_bf16(std::span<const float>(v));
}

namespace detail {

// Cyclic Jacobi eigendecomposition of a symmetric matrix, in double.
// Eigenpairs are returned sorted by eigenvalue descending. Throws after
// the sweep cap, carrying the remaining off-diagonal residual.
struct EigenResult {
  std::vector<double> values;   // n, descending
  std::vector<double> vectors;  // n x n column-major, vectors[:, i]
};

inline EigenResult jacobi_eigen_sym(std::vector<double> a, std::size_t n) {
  constexpr int kMaxSweeps = 100;
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

  auto off_norm = [&]() {
    double s = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) s += a[q * n + p] * a[q * n + p];
    return std::sqrt(2.0 * s);
  };
  double fro = 0.0;
  for (double x : a) fro += x * x;
  fro = std::sqrt(fro);
  const double tol = 1e-14 * (fro > 0.0 ? fro : 1.0);

  int sweep = 0;
  while (off_norm() > tol) {
    if (++sweep > kMaxSweeps)
      throw NumericError(
          "jacobi_eigen_sym: no convergence after " +
          std::to_string(kMaxSweeps) +
          " sweeps, off-diagonal residual = " + std::to_string(off_norm()));
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[q * n + p];
        if (apq == 0.0) continue;
        const double app = a[p * n + p];
        const double aqq = a[q * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t i = 0; i < n; ++i) {
          const double aip = a[p * n + i];
          const double aiq = a[q * n + i];
          a[p * n + i] = c * aip - s * aiq;
          a[q * n + i] = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double api = a[i * n + p];
          const double aqi = a[i * n + q];
          a[i * n + p] = c * api - s * aqi;
          a[i * n + q] = s * api + c * aqi;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vip = v[p * n + i];
          const double viq = v[q * n + i];
          v[p * n + i] = c * vip - s * viq;
          v[q * n + i] = s * vip + c * viq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    const double lx = a[x * n + x], ly = a[y * n + y];
    if (lx != ly) return lx > ly;
    return x < y;
  });

  EigenResult r;
  r.values.resize(n);
  r.vectors.resize(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    r.values[i] = a[order[i] * n + order[i]];
    for (std::size_t row = 0; row < n; ++row)
      r.vectors[i * n + row] = v[order[i] * n + row];
  }
  return r;
}

}  // namespace detail

// Rank-r truncated SVD fit: Z1 = U_r * Sigma_r, Z2 = V_r, computed from an
// eigendecomposition of the smaller Gram matrix. Optimal in Frobenius norm
// over rank-r matrices.
inline LowRankApprox fit_low_rank_svd(const ScoreMatrix& z, std::size_t r) {
  const std::size_t d = z.rows();
  const std::size_t l = z.cols();
  if (l == 0) throw std::invalid_argument("fit_low_rank_svd: empty matrix");
  if (r < 1 || r > std::min(d, l))
    throw std::invalid_argument("fit_low_rank_svd: rank " + std::to_string(r) +
                                " outside [1, min(d,l)=" +
                                std::to_string(std::min(d, l)) + "]");

  const bool gram_left = d <= l;  // eigendecompose Z Z^T (d x d) vs Z^T Z
  const std::size_t n = gram_left ? d : l;
  std::vector<double> gram(n * n, 0.0);
  if (gram_left) {
    for (std::size_t j = 0; j < l; ++j) {
      const auto c = z.col(j);
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b)
          gram[b * d + a] += static_cast<double>(c[a]) * c[b];
    }
  } else {
    for (std::size_t a = 0; a < l; ++a) {
      const auto ca = z.col(a);
      for (std::size_t b = a; b < l; ++b) {
        const auto cb = z.col(b);
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i)
          s += static_cast<double>(ca[i]) * cb[i];
        gram[b * l + a] = s;
        gram[a * l + b] = s;
      }
    }
  }

  const detail::EigenResult eig = detail::jacobi_eigen_sym(std::move(gram), n);

  LowRankApprox lr;
  lr.rank = r;
  lr.z1 = ScoreMatrix(d, r);
  lr.z2 = ScoreMatrix(l, r);
  for (std::size_t q = 0; q < r; ++q) {
    const double lambda = std::max(eig.values[q], 0.0);
    const double sigma = std::sqrt(lambda);
    const double* w = eig.vectors.data() + q * n;  // unit eigenvector
    if (sigma <= 1e-12 * std::sqrt(std::max(eig.values[0], 0.0)) ||
        sigma == 0.0) {
      continue;  // rank deficient: leave factor columns zero
    }
    if (gram_left) {
      // w = u_q; v_q = Z^T u_q / sigma
      for (std::size_t i = 0; i < d; ++i)
        lr.z1.at(i, q) = static_cast<float>(w[i] * sigma);
      for (std::size_t j = 0; j < l; ++j) {
        const auto c = z.col(j);
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i) s += c[i] * w[i];
        lr.z2.at(j, q) = static_cast<float>(s / sigma);
      }
    } else {
      // w = v_q; u_q = Z v_q / sigma
      for (std::size_t j = 0; j < l; ++j)
        lr.z2.at(j, q) = static_cast<float>(w[j]);
      for (std::size_t i = 0; i < d; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < l; ++j) s += z.at(i, j) * w[j];
        lr.z1.at(i, q) = static_cast<float>(s);
      }
    }
  }
  return lr;
}

// Random-sketch baseline for the projection ablation: Z1 = G with
// orthonormalized Gaussian columns, Z2 = Z^T G, so the approximate scores
// are Z^T (G G^T) x. Deterministic under seed.
inline LowRankApprox random_low_rank(const ScoreMatrix& z, std::size_t r,
                                     std::uint64_t seed) {
  const std::size_t d = z.rows();
  const std::size_t l = z.cols();
  if (l == 0) throw std::invalid_argument("random_low_rank: empty matrix");
  if (r < 1 || r > std::min(d, l))
    throw std::invalid_argument("random_low_rank: rank " + std::to_string(r) +
                                " outside [1, min(d,l)=" +
                                std::to_string(std::min(d, l)) + "]");

  Rng rng(seed);
  std::vector<std::vector<double>> g(r, std::vector<double>(d));
  for (std::size_t q = 0; q < r; ++q) {
    for (int attempt = 0;; ++attempt) {
      for (std::size_t i = 0; i < d; ++i) g[q][i] = rng.next_gaussian();
      for (std::size_t p = 0; p < q; ++p) {
        double proj = 0.0;
        for (std::size_t i = 0; i < d; ++i) proj += g[q][i] * g[p][i];
        for (std::size_t i = 0; i < d; ++i) g[q][i] -= proj * g[p][i];
      }
      double norm = 0.0;
      for (double x : g[q]) norm += x * x;
      norm = std::sqrt(norm);
      if (norm > 1e-8) {
        for (std::size_t i = 0; i < d; ++i) g[q][i] /= norm;
        break;
      }
      if (attempt > 16)
        throw NumericError("random_low_rank: degenerate sketch");
    }
  }

  LowRankApprox lr;
  lr.rank = r;
  lr.z1 = ScoreMatrix(d, r);
  lr.z2 = ScoreMatrix(l, r);
  for (std::size_t q = 0; q < r; ++q)
    for (std::size_t i = 0; i < d; ++i)
      lr.z1.at(i, q) = static_cast<float>(g[q][i]);
  for (std::size_t j = 0; j < l; ++j) {
    const auto c = z.col(j);
    for (std::size_t q = 0; q < r; ++q) {
      double s = 0.0;
      for (std::size_t i = 0; i < d; ++i) s += c[i] * g[q][i];
      lr.z2.at(j, q) = static_cast<float>(s);
    }
  }
  return lr;
}

enum class ScorerKind : std::uint8_t {
  kExactCopy,
  kLowRank,
  kQuantized,
  kLowRankQuantized,
};

inline const char* scorer_kind_name(ScorerKind k) {
  switch (k) {
    case ScorerKind::kExactCopy: return "exact";
    case ScorerKind::kLowRank: return "low-rank";
    case ScorerKind::kQuantized: return "quantized";
    case ScorerKind::kLowRankQuantized: return "low-rank-quantized";
  }
  return "?";
}

// The cheap stand-in for Z used to pick candidates. ExactCopy reproduces
// matvec exactly; the quantized variants dequantize on the fly, so their
// scores match the corresponding dense evaluation bit for bit.
class ApproxScorer {
 public:
  static ApproxScorer exact_copy(ScoreMatrix z) {
    return ApproxScorer(ExactCopyImpl{std::move(z)});
  }
  static ApproxScorer low_rank(LowRankApprox lr) {
    check_low_rank(lr);
    return ApproxScorer(LowRankImpl{std::move(lr)});
  }
  static ApproxScorer quantized(QuantizedMatrix q) {
    return ApproxScorer(QuantizedImpl{std::move(q)});
  }
  static ApproxScorer quantized(const ScoreMatrix& z) {
    return quantized(quantize_int4(z));
  }
  // Both factors quantized per the int4 rule.
  static ApproxScorer low_rank_quantized(const LowRankApprox& lr) {
    check_low_rank(lr);
    return ApproxScorer(
        LowRankQuantizedImpl{quantize_int4(lr.z1), quantize_int4(lr.z2)});
  }

  ScorerKind kind() const {
    return static_cast<ScorerKind>(impl_.index());
  }

  std::size_t input_dim() const {
    switch (kind()) {
      case ScorerKind::kExactCopy:
        return std::get<ExactCopyImpl>(impl_).z.rows();
      case ScorerKind::kLowRank:
        return std::get<LowRankImpl>(impl_).lr.z1.rows();
      case ScorerKind::kQuantized:
        return std::get<QuantizedImpl>(impl_).q.rows;
      case ScorerKind::kLowRankQuantized:
        return std::get<LowRankQuantizedImpl>(impl_).q1.rows;
    }
    return 0;
  }

  std::size_t output_dim() const {
    switch (kind()) {
      case ScorerKind::kExactCopy:
        return std::get<ExactCopyImpl>(impl_).z.cols();
      case ScorerKind::kLowRank:
        return std::get<LowRankImpl>(impl_).lr.z2.rows();
      case ScorerKind::kQuantized:
        return std::get<QuantizedImpl>(impl_).q.cols;
      case ScorerKind::kLowRankQuantized:
        return std::get<LowRankQuantizedImpl>(impl_).q2.rows;
    }
    return 0;
  }

  // phi(Z_approx^T x), length output_dim().
  std::vector<float> scores(std::span<const float> x, Activation phi) const {
    if (x.size() != input_dim())
      throw std::invalid_argument(
          "ApproxScorer::scores: scorer expects dim " +
          std::to_string(input_dim()) + " but x has dim " +
          std::to_string(x.size()));
    switch (kind()) {
      case ScorerKind::kExactCopy:
        return matvec(std::get<ExactCopyImpl>(impl_).z, x, phi);
      case ScorerKind::kLowRank: {
        const LowRankApprox& lr = std::get<LowRankImpl>(impl_).lr;
        return low_rank_scores(lr.z1, lr.z2, x, phi);
      }
      case ScorerKind::kQuantized: {
        const QuantizedMatrix& q = std::get<QuantizedImpl>(impl_).q;
        std::vector<float> out(q.cols);
        for (std::size_t j = 0; j < q.cols; ++j) {
          float acc = 0.0f;
          for (std::size_t i = 0; i < q.rows; ++i) acc += q.entry(i, j) * x[i];
          out[j] = apply_activation(phi, acc);
        }
        return out;
      }
      case ScorerKind::kLowRankQuantized: {
        const auto& lrq = std::get<LowRankQuantizedImpl>(impl_);
        return low_rank_quantized_scores(lrq.q1, lrq.q2, x, phi);
      }
    }
    return {};
  }

  // Restriction to the contiguous output range [first, first + count):
  // scores of the slice equal the corresponding slice of scores.
  ApproxScorer slice_cols(std::size_t first, std::size_t count) const {
    if (first + count > output_dim())
      throw std::invalid_argument("ApproxScorer::slice_cols: out of range");
    switch (kind()) {
      case ScorerKind::kExactCopy:
        return exact_copy(
            std::get<ExactCopyImpl>(impl_).z.slice_cols(first, count));
      case ScorerKind::kLowRank: {
        const LowRankApprox& lr = std::get<LowRankImpl>(impl_).lr;
        LowRankApprox out{lr.z1, slice_rows(lr.z2, first, count), lr.rank};
        return ApproxScorer(LowRankImpl{std::move(out)});
      }
      case ScorerKind::kQuantized: {
        const QuantizedMatrix& q = std::get<QuantizedImpl>(impl_).q;
        QuantizedMatrix out;
        out.rows = q.rows;
        out.cols = count;
        out.codes.assign(q.codes.begin() + first * q.rows,
                         q.codes.begin() + (first + count) * q.rows);
        out.scales.assign(q.scales.begin() + first,
                          q.scales.begin() + first + count);
        return ApproxScorer(QuantizedImpl{std::move(out)});
      }
      case ScorerKind::kLowRankQuantized: {
        const auto& lrq = std::get<LowRankQuantizedImpl>(impl_);
        return ApproxScorer(LowRankQuantizedImpl{
            lrq.q1, slice_quantized_rows(lrq.q2, first, count)});
      }
    }
    throw std::logic_error("ApproxScorer::slice_cols: bad variant");
  }

  const ScoreMatrix& exact_matrix() const {
    return std::get<ExactCopyImpl>(impl_).z;
  }
  const LowRankApprox& low_rank_factors() const {
    return std::get<LowRankImpl>(impl_).lr;
  }
  const QuantizedMatrix& quantized_matrix() const {
    return std::get<QuantizedImpl>(impl_).q;
  }

 private:
  struct ExactCopyImpl { ScoreMatrix z; };
  struct LowRankImpl { LowRankApprox lr; };
  struct QuantizedImpl { QuantizedMatrix q; };
  struct LowRankQuantizedImpl { QuantizedMatrix q1; QuantizedMatrix q2; };

  using Impl = std::variant<ExactCopyImpl, LowRankImpl, QuantizedImpl,
                            LowRankQuantizedImpl>;

  explicit ApproxScorer(Impl impl) : impl_(std::move(impl)) {}

  static void check_low_rank(const LowRankApprox& lr) {
    if (lr.z1.cols() != lr.rank || lr.z2.cols() != lr.rank)
      throw std::invalid_argument(
          "ApproxScorer: low-rank factors do not match rank " +
          std::to_string(lr.rank));
  }

  // Evaluation order is fixed as t = Z1^T x, then Z2 * t; the two skinny
  // products are the entire cost saving, O(r(d + l)).
  static std::vector<float> low_rank_scores(const ScoreMatrix& z1,
                                            const ScoreMatrix& z2,
                                            std::span<const float> x,
                                            Activation phi) {
    const std::size_t r = z1.cols();
    std::vector<float> t(r);
    for (std::size_t q = 0; q < r; ++q) {
      const auto c = z1.col(q);
      float acc = 0.0f;
      for (std::size_t i = 0; i < c.size(); ++i) acc += c[i] * x[i];
      t[q] = acc;
    }
    std::vector<float> out(z2.rows(), 0.0f);
    for (std::size_t q = 0; q < r; ++q) {
      const auto c = z2.col(q);
      for (std::size_t i = 0; i < c.size(); ++i) out[i] += c[i] * t[q];
    }
    for (float& v : out) v = apply_activation(phi, v);
    return out;
  }

  // Same arithmetic order as low_rank_scores over dequantized entries, so
  // the two agree bit for bit with dequantized factors.
  static std::vector<float> low_rank_quantized_scores(
      const QuantizedMatrix& q1, const QuantizedMatrix& q2,
      std::span<const float> x, Activation phi) {
    const std::size_t r = q1.cols;
    std::vector<float> t(r);
    for (std::size_t q = 0; q < r; ++q) {
      float acc = 0.0f;
      for (std::size_t i = 0; i < q1.rows; ++i) acc += q1.entry(i, q) * x[i];
      t[q] = acc;
    }
    std::vector<float> out(q2.rows, 0.0f);
    for (std::size_t q = 0; q < r; ++q) {
      for (std::size_t i = 0; i < q2.rows; ++i) out[i] += q2.entry(i, q) * t[q];
    }
    for (float& v : out) v = apply_activation(phi, v);
    return out;
  }

  static ScoreMatrix slice_rows(const ScoreMatrix& m, std::size_t first,
                                std::size_t count) {
    ScoreMatrix out(count, m.cols());
    for (std::size_t j = 0; j < m.cols(); ++j)
      for (std::size_t i = 0; i < count; ++i) out.at(i, j) = m.at(first + i, j);
    return out;
  }

  static QuantizedMatrix slice_quantized_rows(const QuantizedMatrix& q,
                                              std::size_t first,
                                              std::size_t count) {
    QuantizedMatrix out;
    out.rows = count;
    out.cols = q.cols;
    out.scales = q.scales;
    out.codes.resize(count * q.cols);
    for (std::size_t j = 0; j < q.cols; ++j)
      for (std::size_t i = 0; i < count; ++i)
        out.codes[j * count + i] = q.codes[j * q.rows + first + i];
    return out;
  }

  Impl impl_;
};

inline std::vector<float> approx_scores(const ApproxScorer& a,
                                        std::span<const float> x,
                                        Activation phi) {
  return a.scores(x, phi);
}

// --- HIRQ / HIRL file formats -----------------------------------------

inline void write_quantized(std::ostream& os, const QuantizedMatrix& q) {
  detail::put_magic(os, "HIRQ");
  detail::put_u32(os, static_cast<std::uint32_t>(q.rows));
  detail::put_u32(os, static_cast<std::uint32_t>(q.cols));
  for (float s : q.scales) detail::put_f32(os, s);
  const std::size_t n = q.codes.size();
  for (std::size_t i = 0; i < n; i += 2) {
    const std::uint8_t low = static_cast<std::uint8_t>(q.codes[i]) & 0x0F;
    const std::uint8_t high =
        i + 1 < n ? (static_cast<std::uint8_t>(q.codes[i + 1]) & 0x0F) : 0;
    const char byte = static_cast<char>(low | (high << 4));
    os.write(&byte, 1);
  }
}

inline QuantizedMatrix read_quantized(std::istream& is) {
  detail::expect_magic(is, "HIRQ");
  QuantizedMatrix q;
  q.rows = detail::get_u32(is);
  q.cols = detail::get_u32(is);
  q.scales.resize(q.cols);
  for (std::size_t j = 0; j < q.cols; ++j) q.scales[j] = detail::get_f32(is);
  const std::size_t n = q.rows * q.cols;
  q.codes.resize(n);
  auto sign_extend = [](std::uint8_t nibble) {
    return static_cast<std::int8_t>(nibble & 0x08 ? nibble | 0xF0 : nibble);
  };
  for (std::size_t i = 0; i < n; i += 2) {
    char byte = 0;
    is.read(&byte, 1);
    if (!is) throw IoError("io: truncated HIRQ payload");
    const std::uint8_t b = static_cast<std::uint8_t>(byte);
    q.codes[i] = sign_extend(b & 0x0F);
    if (i + 1 < n) q.codes[i + 1] = sign_extend(b >> 4);
  }
  return q;
}

inline void write_low_rank(std::ostream& os, const LowRankApprox& lr) {
  detail::put_magic(os, "HIRL");
  detail::put_u32(os, static_cast<std::uint32_t>(lr.z1.rows()));
  detail::put_u32(os, static_cast<std::uint32_t>(lr.z2.rows()));
  detail::put_u32(os, static_cast<std::uint32_t>(lr.rank));
  detail::put_f32_block(os, lr.z1.values());
  detail::put_f32_block(os, lr.z2.values());
}

inline LowRankApprox read_low_rank(std::istream& is) {
  detail::expect_magic(is, "HIRL");
  const std::uint32_t d = detail::get_u32(is);
  const std::uint32_t l = detail::get_u32(is);
  const std::uint32_t r = detail::get_u32(is);
  LowRankApprox lr;
  lr.rank = r;
  lr.z1 = ScoreMatrix(d, r, detail::get_f32_block(is, std::size_t(d) * r));
  lr.z2 = ScoreMatrix(l, r, detail::get_f32_block(is, std::size_t(l) * r));
  return lr;
}

}  // namespace hire
