#include "embedff/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "embedff/errors.hpp"

namespace embedff {

namespace {

constexpr cplx kI{0.0, 1.0};

double pole_offset(int p) { return (p % 2 == 1) ? kPi / p : 0.0; }

void require_order(int p) {
  if (p < 1) throw Error(ErrorCode::InvalidArgument, "p must be a positive integer");
}

// Poles of Lambda(., alpha) within one spacing of x, one branch per sign.
std::vector<double> candidate_poles(double x, double alpha, int p) {
  const double spacing = kTwoPi / p;
  std::vector<double> out;
  for (const double sign : {1.0, -1.0}) {
    const double base = sign * alpha + pole_offset(p);
    const double n = std::round((x - base) / spacing);
    for (int dn = -1; dn <= 1; ++dn) out.push_back(base + (n + dn) * spacing);
  }
  return out;
}

// Nearest candidate to x; ties go to the smaller reduced angle. Candidates within
// kAngleTolerance of `exclude` are skipped when it is given.
double nearest_pole(double x, double alpha, int p, const double* exclude) {
  double best = 0.0;
  double best_dist = INFINITY;
  for (const double c : candidate_poles(x, alpha, p)) {
    if (exclude && std::abs(c - *exclude) <= kAngleTolerance) continue;
    const double dist = std::abs(c - x);
    if (dist < best_dist - 1e-15 ||
        (std::abs(dist - best_dist) <= 1e-15 && reduce_angle(c) < reduce_angle(best))) {
      best = c;
      best_dist = std::min(dist, best_dist);
    }
  }
  return best;
}

// Representative of chi closest to theta modulo 2pi.
double shift_near(double chi, double theta) { return theta + std::remainder(chi - theta, kTwoPi); }

bool is_coalescence_point(double x, int p) {
  const double step = kPi / p;
  return std::abs(x - step * std::round(x / step)) <= kAngleTolerance;
}

cplx residue_term(const EmbeddingBasis& basis, const CVec& b, double theta, double chi) {
  const int p = basis.p();
  return basis.numerator(chi, b, 0) / (static_cast<double>(p) * (chi - theta) * std::sin(p * chi));
}

}  // namespace

cplx lambda(cplx theta, double alpha, int p) {
  const double sign = (p % 2 == 0) ? 1.0 : -1.0;
  return std::cos(static_cast<double>(p) * theta) - sign * std::cos(p * alpha);
}

LambdaValues lambda_with_derivatives(cplx theta, double alpha, int p) {
  const double pd = p;
  return {lambda(theta, alpha, p), -pd * std::sin(pd * theta), -pd * pd * std::cos(pd * theta)};
}

PoleEnvironment pole_environment(double theta, double alpha, int p) {
  require_order(p);
  PoleEnvironment env;
  env.theta0 = nearest_pole(theta, alpha, p, nullptr);
  const double step = kPi / p;
  env.theta_star = step * std::round(env.theta0 / step);
  if (std::abs(env.theta0 - env.theta_star) <= kAngleTolerance) {
    env.theta0 = env.theta_star;
    env.theta0_prime = env.theta_star;
    env.is_double = true;
  } else {
    env.theta0_prime = nearest_pole(env.theta0, alpha, p, &env.theta0);
  }
  return env;
}

std::vector<double> poles_in_interval(double alpha, int p, double lo, double hi) {
  require_order(p);
  const double spacing = kTwoPi / p;
  std::vector<double> out;
  for (const double sign : {1.0, -1.0}) {
    const double base = sign * alpha + pole_offset(p);
    for (double n = std::ceil((lo - base) / spacing); base + n * spacing <= hi; n += 1.0) {
      out.push_back(base + n * spacing);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end(), [](double a, double b) { return std::abs(a - b) <= kAngleTolerance; }),
            out.end());
  return out;
}

double RectContour::boundary_distance(double x) const {
  if (x < left) return left - x;
  if (x > right) return x - right;
  return std::min({x - left, right - x, half_height});
}

RectContour rect_contour(const std::vector<double>& points, double h) {
  if (points.empty()) throw Error(ErrorCode::InvalidArgument, "contour needs at least one point");
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "contour margin must be positive");
  const auto [lo, hi] = std::minmax_element(points.begin(), points.end());
  return {*lo - h, *hi + h, h};
}

cplx contour_integral(const std::function<cplx(cplx)>& numerator, double alpha, int p, double theta,
                      const RectContour& contour, int rule_order) {
  require_order(p);
  const double hh = contour.half_height;
  if (!(hh > 0.0) || !(contour.right > contour.left)) throw Error(ErrorCode::InvalidArgument, "degenerate contour");
  auto check = [&](double x, const char* what) {
    if (contour.boundary_distance(x) < 0.5 * hh) {
      throw Error(ErrorCode::PoleOnContour, std::string(what) + " at " + std::to_string(x) + " is too close to the contour");
    }
  };
  check(theta, "theta");
  for (const double pole : poles_in_interval(alpha, p, contour.left - hh, contour.right + hh)) check(pole, "pole");

  const QuadratureRule& rule = gauss_legendre(rule_order);
  const cplx corners[4] = {{contour.left, -hh}, {contour.right, -hh}, {contour.right, hh}, {contour.left, hh}};
  cplx total = 0.0;
  for (int edge = 0; edge < 4; ++edge) {
    const cplx a = corners[edge];
    const cplx b = corners[(edge + 1) % 4];
    const int panels = std::max(1, static_cast<int>(std::ceil(std::abs(b - a) / (2.0 * hh) - 1e-12)));
    for (int k = 0; k < panels; ++k) {
      const cplx pa = a + (b - a) * (static_cast<double>(k) / panels);
      const cplx pb = a + (b - a) * (static_cast<double>(k + 1) / panels);
      const cplx dz = pb - pa;
      total += rule.integrate(
                   [&](double s) {
                     const cplx z = pa + s * dz;
                     return numerator(z) / (lambda(z, alpha, p) * (z - theta));
                   },
                   0.0, 1.0) *
               dz;
    }
  }
  return total / (kTwoPi * kI);
}

cplx contour_eval(const QuadraticInterpolant& rho, double alpha, int p, double theta, const RectContour& contour,
                  int rule_order) {
  return contour_integral([&rho](cplx z) { return rho(z); }, alpha, p, theta, contour, rule_order);
}

EmbeddingBasis::EmbeddingBasis(int p, int M, std::vector<std::shared_ptr<const FarFieldPattern>> fields)
    : p_(p), M_(M), fields_(std::move(fields)) {
  require_order(p);
  if (fields_.empty()) throw Error(ErrorCode::InvalidArgument, "embedding basis needs at least one far field");
  for (const auto& f : fields_) {
    if (!f) throw Error(ErrorCode::InvalidArgument, "null far field in basis");
    angles_.push_back(f->incident_angle());
  }
}

CVec EmbeddingBasis::canonical_values(cplx theta) const {
  CVec out(static_cast<Eigen::Index>(size()));
  for (std::size_t m = 0; m < size(); ++m) out(static_cast<Eigen::Index>(m)) = fields_[m]->value(theta);
  return out;
}

cplx EmbeddingBasis::hatted(cplx theta, std::size_t m, int order) const {
  const LambdaValues lam = lambda_with_derivatives(theta, angles_[m], p_);
  const FarFieldPattern& f = *fields_[m];
  switch (order) {
    case 0:
      return lam.value * f.value(theta);
    case 1:
      return lam.d1 * f.value(theta) + lam.value * f.derivative(theta, 1);
    case 2:
      return lam.d2 * f.value(theta) + 2.0 * lam.d1 * f.derivative(theta, 1) + lam.value * f.derivative(theta, 2);
    default:
      throw Error(ErrorCode::InvalidArgument, "derivative order must be 0, 1 or 2");
  }
}

cplx EmbeddingBasis::numerator(cplx theta, const CVec& b, int order, const CVec* canonical) const {
  if (static_cast<std::size_t>(b.size()) != size()) {
    throw Error(ErrorCode::InvalidArgument, "coefficient vector length does not match the basis");
  }
  cplx sum = 0.0;
  for (std::size_t m = 0; m < size(); ++m) {
    const cplx bm = b(static_cast<Eigen::Index>(m));
    if (bm == cplx{}) continue;
    if (order == 0 && canonical) {
      sum += bm * lambda(theta, angles_[m], p_) * (*canonical)(static_cast<Eigen::Index>(m));
    } else {
      sum += bm * hatted(theta, m, order);
    }
  }
  return sum;
}

cplx naive_eval(const EmbeddingBasis& basis, const CVec& b, double theta, double alpha, const CVec* canonical) {
  const cplx denom = lambda(theta, alpha, basis.p());
  if (denom == cplx{}) throw Error(ErrorCode::PoleAtTheta, "Lambda(theta, alpha) vanishes");
  return basis.numerator(theta, b, 0, canonical) / denom;
}

cplx residue_eval(const EmbeddingBasis& basis, const CVec& b, double theta, double alpha,
                  const std::vector<double>& include, const CVec* canonical) {
  cplx value = naive_eval(basis, b, theta, alpha, canonical);
  for (const double pole : include) {
    const double chi = shift_near(pole, theta);
    if (is_coalescence_point(chi, basis.p())) {
      throw Error(ErrorCode::DoublePoleInSimpleBranch, "pole is a coalescence point");
    }
    if (std::abs(chi - theta) <= kAngleTolerance) throw Error(ErrorCode::PoleAtTheta, "theta coincides with a pole");
    value -= residue_term(basis, b, theta, chi);
  }
  return value;
}

const char* to_string(Branch branch) {
  switch (branch) {
    case Branch::Naive: return "naive";
    case Branch::Residue1: return "residue1";
    case Branch::Residue2: return "residue2";
    case Branch::Rho2Contour: return "rho2-contour";
    case Branch::LHopital2: return "lhopital2";
  }
  return "unknown";
}

StabilizedEvaluator::StabilizedEvaluator(std::shared_ptr<const EmbeddingBasis> basis, CoefficientSupplier supplier,
                                         EvaluatorOptions options)
    : basis_(std::move(basis)), supplier_(std::move(supplier)), options_(options) {
  if (!basis_) throw Error(ErrorCode::InvalidArgument, "evaluator needs a basis");
  if (!(options_.small_h > 0.0) || !(options_.small_h < options_.big_h)) {
    throw Error(ErrorCode::InvalidArgument, "thresholds must satisfy 0 < h < H");
  }
  if (options_.small_h > strip_half_width(basis_->p())) {
    throw Error(ErrorCode::InvalidArgument, "h exceeds the half width of the admissible strip");
  }
  if (options_.rule_order < 1 || options_.rule_order > 200) {
    throw Error(ErrorCode::InvalidArgument, "contour rule order must be in [1, 200]");
  }
}

Evaluation StabilizedEvaluator::evaluate(double theta, double alpha) const {
  return evaluate(theta, alpha, supplier_(alpha));
}

Evaluation StabilizedEvaluator::evaluate(double theta, double alpha, const CVec& b, const CVec* canonical) const {
  const EmbeddingBasis& basis = *basis_;
  const int p = basis.p();
  const double H = options_.big_h;
  const double h = options_.small_h;
  const int order = options_.rule_order;
  const PoleEnvironment env = pole_environment(theta, alpha, p);
  const double t0 = env.theta0;
  const double t1 = env.theta0_prime;
  const double d = std::abs(theta - t0);
  const double sep = std::abs(t0 - t1);

  if (d >= H) return {naive_eval(basis, b, theta, alpha, canonical), Branch::Naive};

  auto numerator = [&](double x, int k) { return basis.numerator(x, b, k); };

  if (d >= h) {
    const cplx naive = naive_eval(basis, b, theta, alpha, canonical);
    if (sep < h) {
      std::vector<InterpolationPoint> pts{{theta, numerator(theta, 0)}, {t0, numerator(t0, 0)}};
      std::optional<InterpolationPoint> slope;
      if (env.is_double) {
        slope = InterpolationPoint{t0, numerator(t0, 1)};
      } else {
        pts.push_back({t1, numerator(t1, 0)});
      }
      const QuadraticInterpolant rho = quadratic_interpolate(pts, slope, kAngleTolerance);
      const RectContour rect = rect_contour({t0, t1}, std::min(h, 0.5 * d));
      return {naive + contour_eval(rho, alpha, p, theta, rect, order), Branch::Rho2Contour};
    }
    if (sep < H) {
      return {naive - residue_term(basis, b, theta, t0) - residue_term(basis, b, theta, t1), Branch::Residue2};
    }
    return {naive - residue_term(basis, b, theta, t0), Branch::Residue1};
  }

  const bool at_pole = d <= kAngleTolerance;
  if (at_pole && env.is_double) {
    const double pd = p;
    return {numerator(t0, 2) / (-pd * pd * std::cos(pd * t0)), Branch::LHopital2};
  }

  const double x = at_pole ? t0 : theta;
  std::vector<InterpolationPoint> pts;
  if (!at_pole) pts.push_back({x, numerator(x, 0)});
  pts.push_back({t0, numerator(t0, 0)});
  if (!env.is_double) pts.push_back({t1, numerator(t1, 0)});
  std::optional<InterpolationPoint> slope;
  if (at_pole || env.is_double) slope = InterpolationPoint{t0, numerator(t0, 1)};
  QuadraticInterpolant rho = quadratic_interpolate(pts, slope, kAngleTolerance);
  // Divided differences over x and a double pole cancel catastrophically once they nearly
  // coincide; below the cube root of machine epsilon the Taylor quadratic is more accurate.
  if (env.is_double && !at_pole && d < std::cbrt(std::numeric_limits<double>::epsilon())) {
    rho = QuadraticInterpolant({t0, t0, t0}, {numerator(t0, 0), numerator(t0, 1), 0.5 * numerator(t0, 2)});
  }

  if (sep < h) {
    return {contour_eval(rho, alpha, p, x, rect_contour({x, t0, t1}, h), order), Branch::Rho2Contour};
  }
  if (sep < H) {
    const double gap = std::min(std::abs(t1 - x), std::abs(t1 - t0));
    const RectContour rect = rect_contour({x, t0}, std::min(h, 0.5 * gap));
    return {contour_eval(rho, alpha, p, x, rect, order) - residue_term(basis, b, x, t1), Branch::Rho2Contour};
  }
  return {contour_eval(rho, alpha, p, x, rect_contour({x, t0}, h), order), Branch::Rho2Contour};
}

double error_constant(double b_norm) {
  const double l = std::log(3.0 + kPi * kPi / 64.0);
  return 128.0 * (5.0 * kPi + 4.0 * l) * (6.0 + kPi * kPi / 64.0) / std::pow(kPi, 4) * b_norm;
}

double strip_half_width(int p) {
  require_order(p);
  return std::log(3.0 + kPi * kPi / 64.0) / p;
}

}  // namespace embedff
