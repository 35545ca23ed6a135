#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "iotids/dataset.hpp"
#include "iotids/error.hpp"
#include "iotids/matrix.hpp"
#include "iotids/random.hpp"

namespace iotids {

/// Truncated factorization A ~ U diag(S) V^T.
///
/// U is m x k, V is n x k, S holds k singular values in descending order.
struct SvdFactors {
  Matrix u;
  std::vector<double> s;
  Matrix v;

  std::size_t rank() const { return s.size(); }

  Matrix reconstruct() const {
    Matrix us = u;
    for (std::size_t i = 0; i < us.rows(); ++i)
      for (std::size_t j = 0; j < us.cols(); ++j) us(i, j) *= s[j];
    return matmul(us, v.transpose());
  }
};

struct RsvdConfig {
  std::size_t rank = 8;              // k
  std::size_t oversampling = 10;     // p, sketch width is k + p
  std::size_t power_iterations = 2;  // q
  std::uint64_t seed = 42;

  std::size_t sketch_width() const { return rank + oversampling; }

  void validate(std::size_t rows, std::size_t cols) const {
    if (rank < 1) throw std::invalid_argument("randomized_svd: rank must be >= 1");
    if (sketch_width() > std::min(rows, cols)) {
      throw std::invalid_argument("randomized_svd: rank + oversampling = " +
                                  std::to_string(sketch_width()) + " exceeds min(m, n) = " +
                                  std::to_string(std::min(rows, cols)));
    }
  }
};

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

inline Matrix from_columns(const std::vector<std::vector<double>>& cols, std::size_t rows) {
  Matrix m(rows, cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j)
    for (std::size_t i = 0; i < rows; ++i) m(i, j) = cols[j][i];
  return m;
}

inline std::vector<std::vector<double>> to_columns(const Matrix& m) {
  std::vector<std::vector<double>> cols(m.cols(), std::vector<double>(m.rows()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) cols[j][i] = m(i, j);
  return cols;
}

// Orthogonalize v against `basis` (two Gram-Schmidt passes).
inline void project_out(std::vector<double>& v, const std::vector<std::vector<double>>& basis) {
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& q : basis) {
      const double c = dot(q, v);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * q[i];
    }
  }
}

// Extends orthonormal columns to `target` columns using standard basis vectors.
inline void complete_basis(std::vector<std::vector<double>>& basis, std::size_t dim,
                           std::size_t target) {
  for (std::size_t e = 0; e < dim && basis.size() < target; ++e) {
    std::vector<double> v(dim, 0.0);
    v[e] = 1.0;
    project_out(v, basis);
    const double nv = norm(v);
    if (nv > 1e-6) {
      for (double& x : v) x /= nv;
      basis.push_back(std::move(v));
    }
  }
  if (basis.size() < target) throw NumericError("complete_basis: could not extend basis");
}

}  // namespace detail

inline constexpr double kRankTolerance = 1e-10;

// Columns whose residual after orthogonalization falls below kRankTolerance of
// their original norm are treated as dependent and dropped.
inline Matrix orthonormal_basis(const Matrix& y) {
  if (y.cols() == 0) throw std::invalid_argument("orthonormal_basis: matrix has no columns");
  if (y.rows() < y.cols())
    throw std::invalid_argument("orthonormal_basis: more columns than rows");
  std::vector<std::vector<double>> basis;
  for (auto& v : detail::to_columns(y)) {
    const double n0 = detail::norm(v);
    if (n0 == 0.0 || !std::isfinite(n0)) continue;
    detail::project_out(v, basis);
    const double n1 = detail::norm(v);
    if (n1 <= kRankTolerance * n0) continue;
    for (double& x : v) x /= n1;
    basis.push_back(std::move(v));
  }
  if (basis.empty()) throw NumericError("orthonormal_basis: rank zero");
  return detail::from_columns(basis, y.rows());
}

inline constexpr std::size_t kOracleMaxDim = 512;

// One-sided (Hestenes) Jacobi SVD. Deterministic reference used by tests and
// for the small projected problem inside randomized_svd. Returns
// min(m, n) singular triplets, U and V orthonormal.
inline SvdFactors svd_oracle(const Matrix& a) {
  if (std::min(a.rows(), a.cols()) > kOracleMaxDim) {
    throw std::invalid_argument("svd_oracle: min(m, n) = " +
                                std::to_string(std::min(a.rows(), a.cols())) + " exceeds cap " +
                                std::to_string(kOracleMaxDim));
  }
  if (a.rows() == 0 || a.cols() == 0) throw std::invalid_argument("svd_oracle: empty matrix");
  if (!a.all_finite()) throw NumericError("svd_oracle: non-finite input");
  if (a.rows() < a.cols()) {
    SvdFactors t = svd_oracle(a.transpose());
    std::swap(t.u, t.v);
    return t;
  }

  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  auto w = detail::to_columns(a);
  std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) v[j][j] = 1.0;

  const double tol = 1e-15 * std::sqrt(static_cast<double>(m));
  constexpr int kMaxSweeps = 80;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = detail::dot(w[p], w[p]);
        const double beta = detail::dot(w[q], w[q]);
        const double gamma = detail::dot(w[p], w[q]);
        if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double wp = w[p][i];
          const double wq = w[q][i];
          w[p][i] = c * wp - s * wq;
          w[q][i] = s * wp + c * wq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v[p][i];
          const double vq = v[q][i];
          v[p][i] = c * vp - s * vq;
          v[q][i] = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = detail::norm(w[j]);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  const double smax = sigma[order[0]];
  const double zero_cut = smax * 1e-13 * static_cast<double>(m);
  SvdFactors f;
  std::vector<std::vector<double>> ucols;
  std::vector<std::vector<double>> vcols;
  std::vector<std::size_t> deficient;
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t j = order[r];
    f.s.push_back(sigma[j]);
    vcols.push_back(v[j]);
    if (sigma[j] > zero_cut && sigma[j] > 0.0) {
      std::vector<double> u = w[j];
      for (double& x : u) x /= sigma[j];
      ucols.push_back(std::move(u));
    } else {
      deficient.push_back(r);
      ucols.emplace_back();
    }
  }
  if (!deficient.empty()) {
    // left vectors for (numerically) zero singular values: any orthonormal
    // completion of the well-defined ones
    std::vector<std::vector<double>> basis;
    for (const auto& u : ucols)
      if (!u.empty()) basis.push_back(u);
    const std::size_t known = basis.size();
    detail::complete_basis(basis, m, known + deficient.size());
    for (std::size_t i = 0; i < deficient.size(); ++i) ucols[deficient[i]] = basis[known + i];
  }
  f.u = detail::from_columns(ucols, m);
  f.v = detail::from_columns(vcols, n);
  return f;
}

// Randomized range finder + small exact SVD. The power iteration re-orthonormalizes
// after every application of A and A^T instead of forming (A A^T)^q A Omega.
inline SvdFactors randomized_svd(const Matrix& a, const RsvdConfig& cfg) {
  cfg.validate(a.rows(), a.cols());
  if (!a.all_finite()) throw NumericError("randomized_svd: non-finite input");
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  const std::size_t k = cfg.rank;
  const std::size_t width = cfg.sketch_width();

  Rng rng(cfg.seed);
  Matrix omega(n, width);
  for (double& x : omega.values()) x = rng.normal();

  Matrix q = orthonormal_basis(matmul(a, omega));
  for (std::size_t it = 0; it < cfg.power_iterations; ++it) {
    const Matrix z = orthonormal_basis(matmul_transposed(a, q));
    q = orthonormal_basis(matmul(a, z));
  }

  const Matrix b = matmul_transposed(q, a);  // r x n, r <= width
  SvdFactors small = svd_oracle(b);
  Matrix u = matmul(q, small.u);

  SvdFactors out;
  const std::size_t have = small.s.size();
  const std::size_t keep = std::min(k, have);
  out.s.assign(small.s.begin(), small.s.begin() + keep);
  auto ucols = detail::to_columns(u.left_cols(keep));
  auto vcols = detail::to_columns(small.v.left_cols(keep));
  if (keep < k) {
    // range captured fewer than k directions: pad with zero singular values
    detail::complete_basis(ucols, m, k);
    detail::complete_basis(vcols, n, k);
    out.s.resize(k, 0.0);
  }
  out.u = detail::from_columns(ucols, m);
  out.v = detail::from_columns(vcols, n);
  return out;
}

inline DatasetTable project(const DatasetTable& table, const Matrix& basis) {
  if (basis.rows() != table.cols()) {
    throw std::invalid_argument("project: basis has " + std::to_string(basis.rows()) +
                                " rows, table has " + std::to_string(table.cols()) + " columns");
  }
  DatasetTable out;
  out.features = matmul(table.features, basis);
  out.labels = table.labels;
  for (std::size_t j = 0; j < basis.cols(); ++j) out.feature_names.push_back("svd_" + std::to_string(j));
  return out;
}

// Replaces the features by their coordinates in the right singular basis.
inline DatasetTable project(const DatasetTable& table, const SvdFactors& factors) {
  return project(table, factors.v);
}

}  // namespace iotids
