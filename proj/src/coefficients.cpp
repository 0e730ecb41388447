#include "embedff/coefficients.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "embedff/errors.hpp"

namespace embedff {

double condition_number(const CMat& matrix) {
  if (matrix.size() == 0) return 0.0;
  const auto svd = jacobi_svd(matrix);
  const double smin = svd.sigma(svd.sigma.size() - 1);
  return smin > 0.0 ? svd.sigma(0) / smin : std::numeric_limits<double>::infinity();
}

SystemMatrix build_system(const EmbeddingBasis& basis) {
  const auto n = static_cast<Eigen::Index>(basis.size());
  SystemMatrix sys;
  sys.p = basis.p();
  sys.entries.resize(n, n);
  for (Eigen::Index m = 0; m < n; ++m) {
    for (Eigen::Index mp = 0; mp < n; ++mp) {
      sys.entries(m, mp) = basis.hatted(basis.angle(static_cast<std::size_t>(m)), static_cast<std::size_t>(mp));
    }
  }
  const auto svd = jacobi_svd(sys.entries);
  sys.singular_values = svd.sigma;
  const double smin = svd.sigma(n - 1);
  sys.condition = smin > 0.0 ? svd.sigma(0) / smin : std::numeric_limits<double>::infinity();
  return sys;
}

CVec system_rhs(const EmbeddingBasis& basis, double alpha) {
  const double sign = (basis.p() % 2 == 1) ? 1.0 : -1.0;
  CVec d(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t m = 0; m < basis.size(); ++m) d(static_cast<Eigen::Index>(m)) = sign * basis.hatted(alpha, m);
  return d;
}

CoefficientSolver::CoefficientSolver(std::shared_ptr<const EmbeddingBasis> basis, SolverOptions options)
    : basis_(std::move(basis)), options_(options) {
  if (!basis_) throw Error(ErrorCode::InvalidArgument, "solver needs a basis");
  if (basis_->size() < static_cast<std::size_t>(basis_->M())) {
    throw Error(ErrorCode::InvalidArgument, "need at least M canonical angles");
  }
  system_ = build_system(*basis_);
  if (options_.strategy == Strategy::One) {
    if (!(options_.delta > 0.0)) throw Error(ErrorCode::InvalidArgument, "strategy one needs delta > 0");
    svd_ = jacobi_svd(system_.entries);
    pseudo_inverse_ = tsvd_pseudoinverse(svd_, options_.delta, &rank_);
  }
}

void CoefficientSolver::prepare_subset() const {
  std::call_once(subset_once_, [this] {
    const auto total = static_cast<Eigen::Index>(basis_->size());
    const auto M = static_cast<Eigen::Index>(basis_->M());
    ++subset_calls_;
    if (M >= total) {
      subset_.resize(static_cast<std::size_t>(total));
      for (Eigen::Index i = 0; i < total; ++i) subset_[static_cast<std::size_t>(i)] = i;
    } else {
      subset_ = column_subset(system_.entries, M);
    }
    const auto n = static_cast<Eigen::Index>(subset_.size());
    CMat sub(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index c = 0; c < n; ++c) sub(r, c) = system_.entries(subset_[r], subset_[c]);
    }
    sub_lu_.compute(sub);
    const double scale = sub.cwiseAbs().maxCoeff();
    const double pivot = sub_lu_.matrixLU().diagonal().cwiseAbs().minCoeff();
    if (!(scale > 0.0) || !(pivot > 1e-14 * scale)) {
      throw Error(ErrorCode::SingularSubmatrix, "selected submatrix is numerically singular");
    }
    sub_condition_ = condition_number(sub);
  });
}

const std::vector<Eigen::Index>& CoefficientSolver::subset() const {
  prepare_subset();
  return subset_;
}

double CoefficientSolver::inverted_condition() const {
  if (options_.strategy == Strategy::One) return system_.condition;
  prepare_subset();
  return sub_condition_;
}

CoefficientVector CoefficientSolver::coefficients_for(double alpha) const {
  return solve_rhs(system_rhs(*basis_, alpha));
}

CoefficientVector CoefficientSolver::solve_rhs(const CVec& rhs) const {
  const auto total = static_cast<Eigen::Index>(basis_->size());
  if (rhs.size() != total) throw Error(ErrorCode::InvalidArgument, "right-hand side has the wrong length");
  CoefficientVector out;
  out.strategy = options_.strategy;
  if (options_.strategy == Strategy::One) {
    out.delta = options_.delta;
    out.values = pseudo_inverse_ * rhs;
    out.rank = rank_;
    out.degenerate = (rank_ == 0);
    out.indices.resize(static_cast<std::size_t>(total));
    for (Eigen::Index i = 0; i < total; ++i) out.indices[static_cast<std::size_t>(i)] = i;
  } else {
    prepare_subset();
    const auto n = static_cast<Eigen::Index>(subset_.size());
    CVec sub_rhs(n);
    for (Eigen::Index r = 0; r < n; ++r) sub_rhs(r) = rhs(subset_[r]);
    const CVec sub_b = sub_lu_.solve(sub_rhs);
    out.values = CVec::Zero(total);
    for (Eigen::Index r = 0; r < n; ++r) out.values(subset_[r]) = sub_b(r);
    out.indices = subset_;
    out.rank = static_cast<int>(n);
  }
  out.residual = (system_.entries * out.values - rhs).norm();
  out.norm = out.values.norm();
  return out;
}

CoefficientSupplier CoefficientSolver::supplier() const {
  return [this](double alpha) { return coefficients_for(alpha).values; };
}

void write_coefficients_csv(std::ostream& out, const EmbeddingBasis& basis, const CoefficientVector& b) {
  out.precision(17);
  out << "# strategy = " << static_cast<int>(b.strategy) << '\n';
  if (b.strategy == Strategy::One) out << "# delta = " << b.delta << '\n';
  out << "# rank = " << b.rank << '\n';
  out << "# residual = " << b.residual << '\n';
  out << "# norm = " << b.norm << '\n';
  out << "# degenerate = " << (b.degenerate ? "true" : "false") << '\n';
  out << "index,angle,real,imag\n";
  for (Eigen::Index i = 0; i < b.values.size(); ++i) {
    out << i << ',' << basis.angle(static_cast<std::size_t>(i)) << ',' << b.values(i).real() << ','
        << b.values(i).imag() << '\n';
  }
}

void write_diagnostics_csv(std::ostream& out, const CoefficientSolver& solver) {
  out.precision(17);
  out << "# condition_full = " << solver.system().condition << '\n';
  out << "# condition_inverted = " << solver.inverted_condition() << '\n';
  out << "index,singular_value\n";
  const RVec& s = solver.system().singular_values;
  for (Eigen::Index i = 0; i < s.size(); ++i) out << i << ',' << s(i) << '\n';
}

}  // namespace embedff
