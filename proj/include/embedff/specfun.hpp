#pragma once

#include <optional>
#include <vector>

#include "embedff/types.hpp"

namespace embedff {

/// Bessel functions of the first and second kind, orders 0 and 1, for x > 0.
/// Ascending series for x <= 8, Miller backward recurrence with Neumann series for
/// 8 < x < 17, Hankel asymptotic expansion beyond.
struct BesselPair {
  double j;
  double y;
};
BesselPair bessel_jy(int order, double x);

/// H^(1)_order(x) = J_order(x) + i Y_order(x), order in {0, 1}, x > 0.
cplx hankel1(int order, double x);

/// Gauss-Legendre rule on [-1, 1].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }

  /// Integrates f over [a, b].
  template <typename F>
  auto integrate(F&& f, double a, double b) const {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    decltype(f(mid)) sum{};
    for (std::size_t i = 0; i < nodes.size(); ++i) sum += weights[i] * f(mid + half * nodes[i]);
    return sum * half;
  }
};

/// n-point rule, 1 <= n <= 200. Rules are cached, so the reference stays valid.
const QuadratureRule& gauss_legendre(int n);

struct InterpolationPoint {
  cplx node;
  cplx value;
};

/// Degree <= 2 polynomial in Newton form; confluent (Hermite) nodes allowed.
class QuadraticInterpolant {
 public:
  QuadraticInterpolant() = default;
  QuadraticInterpolant(std::vector<cplx> nodes, std::vector<cplx> coefficients)
      : nodes_(std::move(nodes)), coeffs_(std::move(coefficients)) {}

  cplx operator()(cplx z) const {
    cplx result = coeffs_.empty() ? cplx{} : coeffs_.back();
    for (std::size_t i = coeffs_.size(); i-- > 1;) result = result * (z - nodes_[i - 1]) + coeffs_[i - 1];
    return result;
  }
  cplx derivative(cplx z) const;

  const std::vector<cplx>& nodes() const { return nodes_; }
  const std::vector<cplx>& coefficients() const { return coeffs_; }
  std::size_t degree() const { return coeffs_.empty() ? 0 : coeffs_.size() - 1; }

 private:
  std::vector<cplx> nodes_;
  std::vector<cplx> coeffs_;
};

/// Interpolates 2 or 3 distinct points, or 2 points plus a derivative at one of them.
/// Nodes closer than `coincidence_tol` are treated as the same node; a repeated node is
/// only allowed when it carries the derivative constraint.
QuadraticInterpolant quadratic_interpolate(std::vector<InterpolationPoint> points,
                                           std::optional<InterpolationPoint> derivative = std::nullopt,
                                           double coincidence_tol = 1e-13);

}  // namespace embedff
