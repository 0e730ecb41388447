#include "embedff/specfun.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "embedff/errors.hpp"

namespace embedff {

namespace {

constexpr double kEulerGamma = 0.57721566490153286060651209008240243;

// Ascending series, accurate for x <= 8.
BesselPair series_jy(int order, double x) {
  const double t = 0.25 * x * x;
  const double log_term = std::log(0.5 * x) + kEulerGamma;
  if (order == 0) {
    // J0 = sum (-t)^k/(k!)^2,  Y0 = (2/pi)[(ln(x/2)+g) J0 + sum (-1)^{k+1} H_k t^k/(k!)^2]
    double term = 1.0, j = 1.0, s = 0.0, harmonic = 0.0;
    for (int k = 1; k < 200; ++k) {
      term *= -t / (static_cast<double>(k) * k);
      harmonic += 1.0 / k;
      j += term;
      s -= harmonic * term;
      if (std::abs(term) * (harmonic + 1.0) < 1e-17 * std::max(1.0, std::abs(j))) break;
    }
    return {j, (2.0 / kPi) * (log_term * j + s)};
  }
  // J1 = (x/2) sum (-t)^k/(k!(k+1)!)
  // Y1 = (2/pi)(ln(x/2)+g) J1 - 2/(pi x) - (1/pi)(x/2) sum (-t)^k (H_k + H_{k+1})/(k!(k+1)!)
  double term = 1.0, sj = 1.0, harmonic_k = 0.0, harmonic_k1 = 1.0;
  double sy = harmonic_k + harmonic_k1;
  for (int k = 1; k < 200; ++k) {
    term *= -t / (static_cast<double>(k) * (k + 1));
    harmonic_k += 1.0 / k;
    harmonic_k1 += 1.0 / (k + 1);
    sj += term;
    sy += term * (harmonic_k + harmonic_k1);
    if (std::abs(term) * (harmonic_k1 + harmonic_k) < 1e-17 * std::max(1.0, std::abs(sy))) break;
  }
  const double j = 0.5 * x * sj;
  const double y = (2.0 / kPi) * log_term * j - 2.0 / (kPi * x) - (0.5 * x / kPi) * sy;
  return {j, y};
}

// Miller backward recurrence for J_n, normalized by J0 + 2 sum J_2k = 1, then
// Neumann series for Y0 and Y1.
std::array<BesselPair, 2> miller_jy(double x) {
  const int start = 2 * static_cast<int>(std::ceil(0.5 * (x + 10.0 * std::cbrt(x) + 30.0)));
  std::array<double, 96> j{};
  j[static_cast<std::size_t>(start)] = 1e-30;
  for (int n = start; n >= 1; --n) {
    j[n - 1] = (2.0 * n / x) * j[n] - j[n + 1];
    if (std::abs(j[n - 1]) > 1e250) {
      for (int m = n - 1; m <= start; ++m) j[m] *= 1e-250;
    }
  }
  double norm = j[0];
  for (int k = 2; k <= start; k += 2) norm += 2.0 * j[k];
  for (int n = 0; n <= start; ++n) j[n] /= norm;

  const double log_term = std::log(0.5 * x) + kEulerGamma;
  double s0 = 0.0, s1 = 0.0;
  for (int k = 1; 2 * k + 1 <= start; ++k) {
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    s0 += sign * j[2 * k] / k;
    s1 += sign * (j[2 * k - 1] - j[2 * k + 1]) / k;
  }
  const double y0 = (2.0 / kPi) * log_term * j[0] - (4.0 / kPi) * s0;
  const double y1 = (2.0 / kPi) * (log_term * j[1] - j[0] / x) + (2.0 / kPi) * s1;
  return {BesselPair{j[0], y0}, BesselPair{j[1], y1}};
}

// H^(1)_nu(x) = sqrt(2/(pi x)) e^{i(x - nu pi/2 - pi/4)} sum_k i^k a_k(nu) / x^k
cplx hankel_asymptotic(int order, double x) {
  const double mu = 4.0 * order * order;
  cplx sum = 1.0;
  cplx term = 1.0;
  double last = 1.0;
  for (int k = 1; k < 60; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= cplx(0.0, 1.0) * ((mu - odd * odd) / (8.0 * k * x));
    const double mag = std::abs(term);
    if (mag > last) break;
    sum += term;
    last = mag;
    if (mag < 1e-17) break;
  }
  const double phase = x - (0.5 * order + 0.25) * kPi;
  return std::sqrt(2.0 / (kPi * x)) * cplx(std::cos(phase), std::sin(phase)) * sum;
}

}  // namespace

BesselPair bessel_jy(int order, double x) {
  if (order != 0 && order != 1) throw Error(ErrorCode::DomainError, "only orders 0 and 1 are supported");
  if (!(x > 0.0)) throw Error(ErrorCode::DomainError, "Bessel functions need x > 0");
  if (x <= 8.0) return series_jy(order, x);
  if (x < 17.0) return miller_jy(x)[static_cast<std::size_t>(order)];
  const cplx h = hankel_asymptotic(order, x);
  return {h.real(), h.imag()};
}

cplx hankel1(int order, double x) {
  const BesselPair jy = bessel_jy(order, x);
  return {jy.j, jy.y};
}

namespace {

QuadratureRule build_gauss_legendre(int n) {
  QuadratureRule rule;
  rule.nodes.assign(static_cast<std::size_t>(n), 0.0);
  rule.weights.assign(static_cast<std::size_t>(n), 0.0);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) <= 1e-15) break;
    }
    // Recompute the derivative at the converged root.
    double p0 = 1.0, p1 = 0.0;
    for (int j = 1; j <= n; ++j) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
    }
    dp = n * (z * p0 - p1) / (z * z - 1.0);
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.nodes[static_cast<std::size_t>(i)] = -z;
    rule.nodes[static_cast<std::size_t>(n - 1 - i)] = z;
    rule.weights[static_cast<std::size_t>(i)] = w;
    rule.weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  if (n % 2 == 1) rule.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
  return rule;
}

}  // namespace

const QuadratureRule& gauss_legendre(int n) {
  if (n < 1 || n > 200) throw Error(ErrorCode::InvalidArgument, "Gauss-Legendre order must be in [1, 200]");
  static const std::vector<QuadratureRule> table = [] {
    std::vector<QuadratureRule> rules;
    rules.reserve(200);
    for (int m = 1; m <= 200; ++m) rules.push_back(build_gauss_legendre(m));
    return rules;
  }();
  return table[static_cast<std::size_t>(n - 1)];
}

cplx QuadraticInterpolant::derivative(cplx z) const {
  if (coeffs_.size() <= 1) return 0.0;
  if (coeffs_.size() == 2) return coeffs_[1];
  return coeffs_[1] + coeffs_[2] * ((z - nodes_[0]) + (z - nodes_[1]));
}

QuadraticInterpolant quadratic_interpolate(std::vector<InterpolationPoint> points,
                                           std::optional<InterpolationPoint> derivative,
                                           double coincidence_tol) {
  if (points.empty()) throw Error(ErrorCode::InvalidArgument, "no interpolation points");
  auto less = [](const InterpolationPoint& a, const InterpolationPoint& b) {
    if (a.node.real() != b.node.real()) return a.node.real() < b.node.real();
    return a.node.imag() < b.node.imag();
  };
  std::sort(points.begin(), points.end(), less);

  auto close = [coincidence_tol](cplx a, cplx b) {
    return std::abs(a - b) <= coincidence_tol;
  };
  std::vector<InterpolationPoint> distinct;
  for (const auto& pt : points) {
    if (!distinct.empty() && close(distinct.back().node, pt.node)) {
      if (!derivative || !close(derivative->node, pt.node)) {
        throw Error(ErrorCode::CoincidentNodesWithoutDerivative, "repeated node without a derivative constraint");
      }
      continue;
    }
    distinct.push_back(pt);
  }
  const std::size_t conditions = distinct.size() + (derivative ? 1 : 0);
  if (conditions > 3) throw Error(ErrorCode::OverdeterminedConstraints, "more than 3 conditions for a quadratic");

  if (!derivative) {
    std::vector<cplx> nodes, coeffs;
    for (const auto& pt : distinct) nodes.push_back(pt.node);
    // Divided differences in place.
    std::vector<cplx> dd;
    for (const auto& pt : distinct) dd.push_back(pt.value);
    coeffs.push_back(dd[0]);
    for (std::size_t level = 1; level < dd.size(); ++level) {
      for (std::size_t i = dd.size() - 1; i >= level; --i) {
        dd[i] = (dd[i] - dd[i - 1]) / (nodes[i] - nodes[i - level]);
        if (i == level) break;
      }
      coeffs.push_back(dd[level]);
    }
    return QuadraticInterpolant(std::move(nodes), std::move(coeffs));
  }

  auto it = std::find_if(distinct.begin(), distinct.end(),
                         [&](const InterpolationPoint& pt) { return close(pt.node, derivative->node); });
  if (it == distinct.end()) {
    throw Error(ErrorCode::InvalidArgument, "derivative constraint must sit at an interpolation node");
  }
  const InterpolationPoint base = *it;
  distinct.erase(it);
  std::vector<cplx> nodes{base.node, base.node};
  std::vector<cplx> coeffs{base.value, derivative->value};
  if (!distinct.empty()) {
    const InterpolationPoint& other = distinct.front();
    nodes.push_back(other.node);
    const cplx slope = (other.value - base.value) / (other.node - base.node);
    coeffs.push_back((slope - derivative->value) / (other.node - base.node));
  }
  return QuadraticInterpolant(std::move(nodes), std::move(coeffs));
}

}  // namespace embedff
