#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "embedff/bem.hpp"
#include "embedff/specfun.hpp"
#include "embedff/types.hpp"

namespace embedff {

/// Lambda(theta, alpha) = cos(p theta) - (-1)^p cos(p alpha).
cplx lambda(cplx theta, double alpha, int p);

struct LambdaValues {
  cplx value;
  cplx d1;  // -p sin(p theta)
  cplx d2;  // -p^2 cos(p theta)
};
LambdaValues lambda_with_derivatives(cplx theta, double alpha, int p);

/// The poles nearest to theta. All angles are real numbers close to theta (not reduced
/// mod 2pi), so |theta - theta0| is the periodic distance.
struct PoleEnvironment {
  double theta0 = 0.0;
  double theta0_prime = 0.0;
  double theta_star = 0.0;
  bool is_double = false;
};

/// Tolerance used for every "these two real angles coincide" decision.
inline constexpr double kAngleTolerance = 1e-13;

PoleEnvironment pole_environment(double theta, double alpha, int p);

/// Real zeros of Lambda(., alpha) inside [lo, hi].
std::vector<double> poles_in_interval(double alpha, int p, double lo, double hi);

/// [left, right] x [-half_height, half_height], traversed counter-clockwise.
struct RectContour {
  double left = 0.0;
  double right = 0.0;
  double half_height = 0.0;

  /// Distance from a real point to the rectangle boundary.
  double boundary_distance(double x) const;
};

RectContour rect_contour(const std::vector<double>& points, double h);

/// (1/2 pi i) * closed integral of numerator(z) / (Lambda(z, alpha) (z - theta)) over the contour,
/// with `rule_order` Gauss points per panel. Edges longer than twice the half height are split
/// into equal panels. Throws PoleOnContour if theta or a real zero of Lambda lies closer than
/// half_height/2 to the boundary.
cplx contour_integral(const std::function<cplx(cplx)>& numerator, double alpha, int p, double theta,
                      const RectContour& contour, int rule_order = 20);

cplx contour_eval(const QuadraticInterpolant& rho, double alpha, int p, double theta, const RectContour& contour,
                  int rule_order = 20);

/// Canonical far fields together with the embedding integers of the shape.
class EmbeddingBasis {
 public:
  EmbeddingBasis(int p, int M, std::vector<std::shared_ptr<const FarFieldPattern>> fields);

  int p() const { return p_; }
  int M() const { return M_; }
  std::size_t size() const { return fields_.size(); }
  const std::vector<double>& angles() const { return angles_; }
  double angle(std::size_t m) const { return angles_[m]; }
  const FarFieldPattern& field(std::size_t m) const { return *fields_[m]; }

  /// D_N(theta, alpha_m) for every m.
  CVec canonical_values(cplx theta) const;
  /// d^order/dtheta^order of Lambda(theta, alpha_m) D_N(theta, alpha_m), order in {0, 1, 2}.
  cplx hatted(cplx theta, std::size_t m, int order = 0) const;
  /// sum_m b_m * d^order/dtheta^order [Lambda(theta, alpha_m) D_N(theta, alpha_m)]. Terms with
  /// b_m = 0 are skipped. `canonical` optionally supplies D_N(theta, alpha_m) for order 0.
  cplx numerator(cplx theta, const CVec& b, int order = 0, const CVec* canonical = nullptr) const;

 private:
  int p_;
  int M_;
  std::vector<std::shared_ptr<const FarFieldPattern>> fields_;
  std::vector<double> angles_;
};

/// Uncorrected embedding formula. Throws PoleAtTheta if Lambda(theta, alpha) is exactly zero.
cplx naive_eval(const EmbeddingBasis& basis, const CVec& b, double theta, double alpha,
                const CVec* canonical = nullptr);

/// naive_eval minus the residue of each pole in `include`. Throws DoublePoleInSimpleBranch if an
/// included pole is a coalescence point.
cplx residue_eval(const EmbeddingBasis& basis, const CVec& b, double theta, double alpha,
                  const std::vector<double>& include, const CVec* canonical = nullptr);

enum class Branch { Naive, Residue1, Residue2, Rho2Contour, LHopital2 };
const char* to_string(Branch branch);
inline constexpr int kBranchCount = 5;

struct EvaluatorOptions {
  double big_h = 0.15;
  double small_h = 0.01;
  int rule_order = 20;
};

struct Evaluation {
  cplx value;
  Branch branch;
};

/// Coefficients b(alpha) for the basis, of length basis.size().
using CoefficientSupplier = std::function<CVec(double alpha)>;

class StabilizedEvaluator {
 public:
  StabilizedEvaluator(std::shared_ptr<const EmbeddingBasis> basis, CoefficientSupplier supplier,
                      EvaluatorOptions options = {});

  const EmbeddingBasis& basis() const { return *basis_; }
  const EvaluatorOptions& options() const { return options_; }

  Evaluation evaluate(double theta, double alpha) const;
  /// Same dispatch with caller-supplied coefficients and optional cached D_N(theta, alpha_m).
  Evaluation evaluate(double theta, double alpha, const CVec& b, const CVec* canonical = nullptr) const;
  CVec coefficients(double alpha) const { return supplier_(alpha); }

 private:
  std::shared_ptr<const EmbeddingBasis> basis_;
  CoefficientSupplier supplier_;
  EvaluatorOptions options_;
};

/// 128 (5 pi + 4 ln(3 + pi^2/64)) (6 + pi^2/64) / pi^4 * b_norm.
double error_constant(double b_norm);

/// ln(3 + pi^2/64) / p, the half width of the strip in which contours must stay.
double strip_half_width(int p);

}  // namespace embedff
