#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "embedff/errors.hpp"

namespace embedff {

template <typename Scalar>
struct SvdResult {
  using Real = typename Eigen::NumTraits<Scalar>::Real;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> U;
  Eigen::Matrix<Real, Eigen::Dynamic, 1> sigma;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> V;
  int sweeps = 0;
};

/// One-sided (Hestenes) Jacobi SVD, X = U diag(sigma) V^*, for rows >= cols.
/// Singular values are sorted in descending order; U is completed to orthonormal
/// columns where singular values vanish.
template <typename Derived>
SvdResult<typename Derived::Scalar> jacobi_svd(const Eigen::MatrixBase<Derived>& X, int max_sweeps = 60) {
  using Scalar = typename Derived::Scalar;
  using Real = typename Eigen::NumTraits<Scalar>::Real;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index m = X.rows(), n = X.cols();
  if (m < n) throw Error(ErrorCode::InvalidArgument, "jacobi_svd expects rows >= cols");
  if (n > 200) throw Error(ErrorCode::InvalidArgument, "jacobi_svd supports at most 200 columns");

  Mat A = X;
  Mat V = Mat::Identity(n, n);
  const Real tol = std::numeric_limits<Real>::epsilon() * static_cast<Real>(std::max<Eigen::Index>(m, 1));
  // Columns below this squared norm are rounding noise of a rank-deficient matrix; rotating them
  // never reduces their relative inner products, so they are left alone.
  const Real negligible = tol * tol * A.squaredNorm();
  SvdResult<Scalar> out;
  bool converged = (n < 2);
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    out.sweeps = sweep + 1;
    bool rotated = false;
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const Real alpha = A.col(i).squaredNorm();
        const Real beta = A.col(j).squaredNorm();
        const Scalar gamma = A.col(i).dot(A.col(j));
        const Real g = std::abs(gamma);
        if (g == Real(0) || g <= tol * std::sqrt(alpha * beta) || std::min(alpha, beta) <= negligible) continue;
        rotated = true;
        const Scalar phase = gamma / g;  // absorbed into column j before the real rotation
        const Real zeta = (beta - alpha) / (Real(2) * g);
        const Real t = (zeta >= Real(0) ? Real(1) : Real(-1)) / (std::abs(zeta) + std::sqrt(Real(1) + zeta * zeta));
        const Real c = Real(1) / std::sqrt(Real(1) + t * t);
        const Real s = c * t;
        const auto conj_phase = Eigen::numext::conj(phase);
        for (Mat* target : {&A, &V}) {
          auto ci = target->col(i);
          auto cj = target->col(j);
          for (Eigen::Index r = 0; r < target->rows(); ++r) {
            const Scalar xi = ci(r);
            const Scalar xj = cj(r) * conj_phase;
            ci(r) = c * xi - s * xj;
            cj(r) = s * xi + c * xj;
          }
        }
      }
    }
    converged = !rotated;
  }
  if (!converged) throw Error(ErrorCode::NoConvergence, "Jacobi SVD did not converge");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Eigen::Matrix<Real, Eigen::Dynamic, 1> norms = A.colwise().norm().transpose();
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return norms(a) > norms(b); });

  out.U = Mat::Zero(m, n);
  out.V = Mat(n, n);
  out.sigma.resize(n);
  const Real smax = n > 0 ? norms(order[0]) : Real(0);
  std::vector<Eigen::Index> empty;
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    out.sigma(k) = norms(src);
    out.V.col(k) = V.col(src);
    if (norms(src) > tol * smax && norms(src) > Real(0)) {
      out.U.col(k) = A.col(src) / norms(src);
    } else {
      empty.push_back(k);
    }
  }
  // Complete U with unit vectors orthogonalized against the existing columns.
  Eigen::Index candidate = 0;
  for (const Eigen::Index k : empty) {
    for (; candidate < m; ++candidate) {
      Eigen::Matrix<Scalar, Eigen::Dynamic, 1> v = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Unit(m, candidate);
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index c = 0; c < n; ++c) {
          if (out.U.col(c).squaredNorm() > Real(0)) v -= out.U.col(c) * out.U.col(c).dot(v);
        }
      }
      if (v.norm() > Real(0.5)) {
        out.U.col(k) = v / v.norm();
        ++candidate;
        break;
      }
    }
  }
  return out;
}

/// V diag(sigma^+) U^*, with sigma^+ = 1/sigma for sigma > delta and 0 otherwise.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> tsvd_pseudoinverse(const SvdResult<Scalar>& svd, double delta,
                                                                           int* rank = nullptr) {
  using Real = typename Eigen::NumTraits<Scalar>::Real;
  if (!(delta >= 0.0)) throw Error(ErrorCode::InvalidArgument, "truncation threshold must be non-negative");
  Eigen::Matrix<Real, Eigen::Dynamic, 1> inv(svd.sigma.size());
  int r = 0;
  for (Eigen::Index i = 0; i < svd.sigma.size(); ++i) {
    const bool keep = svd.sigma(i) > static_cast<Real>(delta) && svd.sigma(i) > Real(0);
    inv(i) = keep ? Real(1) / svd.sigma(i) : Real(0);
    r += keep ? 1 : 0;
  }
  if (rank) *rank = r;
  return svd.V * inv.asDiagonal() * svd.U.adjoint();
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> tsvd_pseudoinverse(
    const Eigen::MatrixBase<Derived>& X, double delta, int* rank = nullptr) {
  return tsvd_pseudoinverse(jacobi_svd(X), delta, rank);
}

/// Greedy column subset selection: repeatedly take the column of largest norm (lowest index
/// on ties) and project it out of all columns. Returns 0-based indices in selection order.
template <typename Derived>
std::vector<Eigen::Index> column_subset(const Eigen::MatrixBase<Derived>& X, Eigen::Index count) {
  using Scalar = typename Derived::Scalar;
  using Real = typename Eigen::NumTraits<Scalar>::Real;
  if (count < 1 || count > X.cols()) throw Error(ErrorCode::InvalidArgument, "subset size out of range");
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> A = X;
  const Real scale = A.colwise().norm().maxCoeff();
  std::vector<Eigen::Index> chosen;
  std::vector<bool> used(static_cast<std::size_t>(A.cols()), false);
  while (static_cast<Eigen::Index>(chosen.size()) < count) {
    Eigen::Index best = -1;
    Real best_norm = Real(-1);
    for (Eigen::Index c = 0; c < A.cols(); ++c) {
      if (used[static_cast<std::size_t>(c)]) continue;
      const Real norm = A.col(c).norm();
      if (norm > best_norm) {
        best = c;
        best_norm = norm;
      }
    }
    if (!(best_norm >= Real(1e-14) * scale) || best_norm == Real(0)) {
      throw Error(ErrorCode::ZeroColumnEncountered, "remaining columns vanish before the subset is complete");
    }
    chosen.push_back(best);
    used[static_cast<std::size_t>(best)] = true;
    const auto pivot = A.col(best).eval();
    const Real pivot_sq = pivot.squaredNorm();
    for (Eigen::Index c = 0; c < A.cols(); ++c) {
      A.col(c) -= pivot * (pivot.dot(A.col(c)) / pivot_sq);
    }
  }
  return chosen;
}

}  // namespace embedff
