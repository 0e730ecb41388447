#pragma once

#include <iosfwd>
#include <memory>
#include <mutex>
#include <vector>

#include "embedff/embedding.hpp"
#include "embedff/linalg.hpp"
#include "embedff/types.hpp"

namespace embedff {

/// Oversampled system [Lambda(alpha_m, alpha_m') D_N(alpha_m, alpha_m')], with its singular values.
struct SystemMatrix {
  CMat entries;
  int p = 1;
  RVec singular_values;
  /// sigma_max / sigma_min (infinite for a singular matrix).
  double condition = 0.0;
};

SystemMatrix build_system(const EmbeddingBasis& basis);

/// Right-hand side (-1)^(p+1) [Lambda(alpha, alpha_m) D_N(alpha, alpha_m)].
CVec system_rhs(const EmbeddingBasis& basis, double alpha);

/// sigma_max / sigma_min of a square matrix.
double condition_number(const CMat& matrix);

enum class Strategy { One = 1, Two = 2 };

struct SolverOptions {
  Strategy strategy = Strategy::Two;
  double delta = 1e-8;
};

struct CoefficientVector {
  CVec values;
  Strategy strategy = Strategy::Two;
  double delta = 0.0;
  std::vector<Eigen::Index> indices;
  int rank = 0;
  double residual = 0.0;
  double norm = 0.0;
  /// Strategy one truncated everything: the pseudo-inverse is zero.
  bool degenerate = false;
};

class CoefficientSolver {
 public:
  CoefficientSolver(std::shared_ptr<const EmbeddingBasis> basis, SolverOptions options = {});

  const EmbeddingBasis& basis() const { return *basis_; }
  const SolverOptions& options() const { return options_; }
  const SystemMatrix& system() const { return system_; }

  CoefficientVector coefficients_for(double alpha) const;
  CoefficientVector solve_rhs(const CVec& rhs) const;

  /// Index set used by strategy two (selected on first use, then reused).
  const std::vector<Eigen::Index>& subset() const;
  std::size_t subset_selection_calls() const { return subset_calls_; }
  /// Condition number of the matrix actually inverted: the selected submatrix for strategy
  /// two, the full oversampled matrix for strategy one.
  double inverted_condition() const;

  CoefficientSupplier supplier() const;

 private:
  void prepare_subset() const;

  std::shared_ptr<const EmbeddingBasis> basis_;
  SolverOptions options_;
  SystemMatrix system_;
  SvdResult<cplx> svd_;
  CMat pseudo_inverse_;
  int rank_ = 0;

  mutable std::once_flag subset_once_;
  mutable std::vector<Eigen::Index> subset_;
  mutable Eigen::PartialPivLU<CMat> sub_lu_;
  mutable double sub_condition_ = 0.0;
  mutable std::size_t subset_calls_ = 0;
};

/// Writes `index,angle,real,imag` rows plus a comment block with strategy, residual and norm.
void write_coefficients_csv(std::ostream& out, const EmbeddingBasis& basis, const CoefficientVector& b);
/// Writes the singular value spectrum and condition diagnostics.
void write_diagnostics_csv(std::ostream& out, const CoefficientSolver& solver);

}  // namespace embedff
