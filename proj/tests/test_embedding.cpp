#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "embedff/embedding.hpp"
#include "embedff/errors.hpp"
#include "support.hpp"

using namespace embedff;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::InvalidArgument;
}

// Reference far field D(theta, alpha) from the refined solve of a fixture.
cplx reference_value(const testing::Fixture& fx, double theta, double alpha) {
  const CMat w = far_field_matrix(fx.reference->mesh(), fx.k, {theta});
  return (w * fx.reference->solve(fx.reference->rhs(alpha)))(0);
}

}  // namespace

TEST_CASE("Lambda examples and derivatives") {
  CHECK(std::abs(lambda(0.7, 0.7, 2)) < 1e-15);
  CHECK(std::abs(lambda(kPi - 0.4, 0.4, 1)) < 1e-15);
  CHECK(std::abs(lambda(kPi / 4, 0.0, 2) - (-1.0)) < 1e-15);
  const cplx z(0.8, 0.3);
  const auto v = lambda_with_derivatives(z, 1.1, 3);
  const double h = 1e-5;
  CHECK(std::abs(v.value - lambda(z, 1.1, 3)) < 1e-15);
  CHECK(std::abs(v.d1 - (lambda(z + h, 1.1, 3) - lambda(z - h, 1.1, 3)) / (2 * h)) < 1e-8);
  CHECK(std::abs(v.d2 - (lambda(z + h, 1.1, 3) - 2.0 * v.value + lambda(z - h, 1.1, 3)) / (h * h)) < 1e-4);
}

TEST_CASE("Lambda antisymmetry and the lower and upper bounds") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ang(0.0, kTwoPi), height(-0.8, 0.8), lift(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const int p = 1 + static_cast<int>(rng() % 6);
    const double theta = ang(rng), alpha = ang(rng);
    const double sign = (p % 2 == 1) ? 1.0 : -1.0;
    CHECK(std::abs(lambda(alpha, theta, p) - sign * lambda(theta, alpha, p)) < 1e-14);

    const PoleEnvironment env = pole_environment(theta, alpha, p);
    const double bound = p * p / 8.0 * std::abs(theta - env.theta0) * std::abs(theta - env.theta_star);
    CHECK(bound <= std::abs(lambda(theta, alpha, p)) * (1 + 1e-12) + 1e-15);

    const double c = lift(rng);
    CHECK(std::abs(lambda(theta, alpha, p)) <= std::abs(lambda(cplx(theta, c), alpha, p)) * (1 + 1e-12) + 1e-15);

    const cplx z(theta, height(rng));
    const double e = std::exp(p * std::abs(z.imag()));
    const double mag = std::abs(lambda(z, alpha, p));
    CHECK((e - 3.0) / 2.0 <= mag * (1 + 1e-12));
    CHECK(mag <= (e + 3.0) / 2.0 * (1 + 1e-12));
  }
}

TEST_CASE("pole environment examples") {
  auto env = pole_environment(2.3, kPi / 4, 1);
  CHECK(env.theta0 == doctest::Approx(3 * kPi / 4).epsilon(1e-14));
  CHECK(reduce_angle(env.theta0_prime) == doctest::Approx(5 * kPi / 4).epsilon(1e-14));
  CHECK_FALSE(env.is_double);

  env = pole_environment(2.0, 1.0, 2);
  CHECK(env.theta0 == doctest::Approx(kPi - 1.0).epsilon(1e-14));

  env = pole_environment(0.01, 0.0, 2);
  CHECK(env.theta0 == doctest::Approx(0.0));
  CHECK(env.theta0_prime == env.theta0);
  CHECK(env.is_double);
  CHECK(env.theta_star == doctest::Approx(0.0));
}

TEST_CASE("pole environment ties go to the smaller reduced angle") {
  // p = 2, alpha = 0.5: poles 0.5, pi - 0.5, ... ; theta = pi/2 is equidistant from 0.5 and pi - 0.5.
  const PoleEnvironment env = pole_environment(kPi / 2, 0.5, 2);
  CHECK(reduce_angle(env.theta0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("pole environment finds the nearest zero") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ang(0.0, kTwoPi);
  for (int i = 0; i < 200; ++i) {
    const int p = 1 + static_cast<int>(rng() % 6);
    const double alpha = ang(rng), theta = ang(rng);
    const PoleEnvironment env = pole_environment(theta, alpha, p);
    CHECK(std::abs(lambda(env.theta0, alpha, p)) <= 1e-12);
    CHECK(std::abs(lambda(env.theta0_prime, alpha, p)) <= 1e-12);
    CHECK(env.theta_star * p / kPi == doctest::Approx(std::round(env.theta_star * p / kPi)));
    const double d0 = std::abs(theta - env.theta0);
    // Sign changes of the real function Lambda(., alpha) bracket its simple zeros.
    const double step = 1e-4;
    double prev = lambda(theta - kPi, alpha, p).real();
    for (double x = theta - kPi + step; x <= theta + kPi; x += step) {
      const double cur = lambda(x, alpha, p).real();
      if ((prev < 0) != (cur < 0)) CHECK(std::min(std::abs(x - theta), std::abs(x - step - theta)) >= d0 - step);
      prev = cur;
    }
  }
}

TEST_CASE("poles in an interval") {
  const auto poles = poles_in_interval(kPi / 4, 2, 0.0, kTwoPi);
  REQUIRE(poles.size() == 4);
  for (const double x : poles) CHECK(std::abs(lambda(x, kPi / 4, 2)) < 1e-12);
  CHECK(std::is_sorted(poles.begin(), poles.end()));
}

TEST_CASE("rectangular contours") {
  const RectContour a = rect_contour({0.0}, 0.01);
  CHECK(a.left == doctest::Approx(-0.01));
  CHECK(a.right == doctest::Approx(0.01));
  CHECK(a.half_height == doctest::Approx(0.01));
  const RectContour b = rect_contour({2.0, 1.0}, 0.1);
  CHECK(b.left == doctest::Approx(0.9));
  CHECK(b.right == doctest::Approx(2.1));
  CHECK(b.boundary_distance(1.0) == doctest::Approx(0.1));
  CHECK(b.boundary_distance(2.0) == doctest::Approx(0.1));
  CHECK(b.boundary_distance(1.5) == doctest::Approx(0.1));
}

TEST_CASE("contour evaluation against the residue theorem") {
  const QuadraticInterpolant zero = quadratic_interpolate({{0.0, 0.0}, {1.0, 0.0}});
  CHECK(std::abs(contour_eval(zero, 0.3, 2, 1.0, rect_contour({1.0}, 0.05))) == 0.0);

  // A constant integrand has no residue.
  const double alpha = 0.3;
  const int p = 2;
  auto one = [&](cplx z) { return lambda(z, alpha, p) * (z - 1.2); };
  CHECK(std::abs(contour_integral(one, alpha, p, 1.2, rect_contour({1.2}, 0.05))) < 1e-13);

  // Single simple pole at theta inside, Lambda zero-free inside: value = rho(theta) / Lambda(theta).
  const QuadraticInterpolant rho = quadratic_interpolate({{1.0, cplx(1, 2)}, {1.3, cplx(0, 1)}, {1.5, 3.0}});
  const double theta = 1.2;
  const cplx got = contour_eval(rho, alpha, p, theta, rect_contour({theta}, 0.05));
  const cplx want = rho(theta) / lambda(theta, alpha, p);
  CHECK(std::abs(got - want) <= 1e-10 * std::abs(want));

  CHECK(code_of([&] { contour_eval(rho, alpha, p, alpha + 0.052, rect_contour({alpha + 0.052}, 0.05)); }) ==
        ErrorCode::PoleOnContour);
}

TEST_CASE("error constant and strip width") {
  CHECK(error_constant(0.0) == 0.0);
  CHECK(error_constant(1.0) == doctest::Approx(164.19).epsilon(1e-4));
  CHECK(error_constant(2.6) == doctest::Approx(2.0 * error_constant(1.3)));
  CHECK(strip_half_width(1) == doctest::Approx(1.14874).epsilon(1e-5));
  CHECK(strip_half_width(2) == doctest::Approx(0.5 * strip_half_width(1)));
}

TEST_CASE("naive evaluation") {
  const auto& fx = testing::fixture("square", 5.0);
  const EmbeddingBasis& basis = *fx.model.basis;
  const std::size_t m = 3;
  const double am = basis.angle(m);
  CVec e = CVec::Zero(static_cast<Eigen::Index>(basis.size()));
  e(static_cast<Eigen::Index>(m)) = 1.0;
  for (const double theta : {0.1, 1.7, 4.4}) {
    const cplx got = naive_eval(basis, e, theta, am);
    CHECK(std::abs(got - basis.field(m).value(theta)) <= 1e-12 * std::abs(got));
  }
  CHECK(code_of([&] { naive_eval(basis, e, am, am); }) == ErrorCode::PoleAtTheta);

  // With converged inputs the naive formula is accurate away from the poles.
  const double alpha = 2.2;
  const CVec b = fx.model.solver->coefficients_for(alpha).values;
  for (const double theta : {0.6, 3.9, 5.5}) {
    if (std::abs(theta - pole_environment(theta, alpha, 2).theta0) < 0.3) continue;
    const cplx err = naive_eval(basis, b, theta, alpha) - reference_value(fx, theta, alpha);
    CHECK(std::abs(err) <= 10.0 * fx.e_in * fx.scale);
  }
}

TEST_CASE("blow-up of the naive formula next to a pole") {
  const auto& fx = testing::fixture("square", 5.0);
  const double alpha = 1.0;
  const CVec b = fx.model.solver->coefficients_for(alpha).values;
  const double t0 = pole_environment(2.1, alpha, 2).theta0;
  double previous = 0.0;
  for (const double d : {1e-4, 1e-6, 1e-8}) {
    const double theta = t0 + d;
    const double err = std::abs(naive_eval(*fx.model.basis, b, theta, alpha) - reference_value(fx, theta, alpha));
    const double scaled = err * std::abs(lambda(theta, alpha, 2));
    CHECK(err > previous);
    CHECK(scaled > 0.0);
    previous = err;
  }
  CHECK(previous > 1.0);
}

TEST_CASE("residue evaluation") {
  const auto& fx = testing::fixture("square", 5.0);
  const EmbeddingBasis& basis = *fx.model.basis;
  const double alpha = 2.0;
  const CVec b = fx.model.solver->coefficients_for(alpha).values;
  const double theta = 0.9;
  const PoleEnvironment env = pole_environment(theta, alpha, 2);
  CHECK(residue_eval(basis, b, theta, alpha, {}) == naive_eval(basis, b, theta, alpha));

  // Quadrature of the full contour integral around theta and theta0.
  const double t = env.theta0 + 0.04;
  auto numerator = [&](cplx z) { return basis.numerator(z, b); };
  const cplx quad = contour_integral(numerator, alpha, 2, t, rect_contour({t, env.theta0}, 0.01));
  const cplx res = residue_eval(basis, b, t, alpha, {env.theta0});
  CHECK(std::abs(quad - res) <= 1e-10 * std::abs(res));

  // With converged far fields the numerator nearly vanishes at every pole.
  for (const double chi : poles_in_interval(alpha, 2, 0.0, kTwoPi)) {
    CHECK(std::abs(basis.numerator(chi, b)) <= 10.0 * fx.e_in * b.cwiseAbs().sum() * fx.scale);
  }

  CHECK(code_of([&] { residue_eval(basis, b, 0.1, 0.0, {0.0}); }) == ErrorCode::DoublePoleInSimpleBranch);
}

TEST_CASE("evaluator dispatch") {
  const auto& fx = testing::fixture("square", 5.0);
  const StabilizedEvaluator& ev = *fx.model.evaluator;
  const EmbeddingBasis& basis = *fx.model.basis;

  SUBCASE("far from the poles the value is the naive one") {
    const double alpha = 2.0;
    const CVec b = ev.coefficients(alpha);
    const Evaluation e = ev.evaluate(0.2, alpha);
    CHECK(e.branch == Branch::Naive);
    CHECK(e.value == naive_eval(basis, b, 0.2, alpha));
  }

  SUBCASE("every branch is reachable") {
    std::set<Branch> seen;
    seen.insert(ev.evaluate(2.0 + 0.05, 2.0).branch);                 // single residue
    seen.insert(ev.evaluate(kPi / 2 + 0.1, kPi / 2 + 0.05).branch);   // two residues
    seen.insert(ev.evaluate(0.05, 0.002).branch);                     // contour around both poles
    seen.insert(ev.evaluate(2.0 + 0.001, 2.0).branch);                // contour, close to theta0
    seen.insert(ev.evaluate(kPi, 0.0).branch);                        // double pole hit exactly
    seen.insert(ev.evaluate(0.7, 2.0).branch);
    CHECK(seen.size() == kBranchCount);
    CHECK(ev.evaluate(kPi / 2 + 0.1, kPi / 2 + 0.05).branch == Branch::Residue2);
    CHECK(ev.evaluate(kPi, 0.0).branch == Branch::LHopital2);
    CHECK(std::string(to_string(Branch::Rho2Contour)) == "rho2-contour");
  }

  SUBCASE("stabilized values track the reference across every branch") {
    for (const auto& [theta, alpha] : std::vector<std::pair<double, double>>{
             {2.05, 2.0}, {kPi / 2 + 0.1, kPi / 2 + 0.05}, {0.05, 0.002}, {2.001, 2.0}, {kPi, 0.0}, {2.0, 2.0}}) {
      const cplx err = ev.evaluate(theta, alpha).value - reference_value(fx, theta, alpha);
      CAPTURE(theta);
      CAPTURE(alpha);
      CHECK(std::abs(err) <= 10.0 * fx.e_in * fx.scale);
    }
  }

  SUBCASE("the double-pole value is the limit of nearby values") {
    const double alpha = 0.0;
    const cplx at = ev.evaluate(kPi, alpha).value;
    for (const double eps : {1e-6, 1e-8, 1e-10}) {
      const Evaluation near = ev.evaluate(kPi + eps, alpha);
      CHECK(near.branch == Branch::Rho2Contour);
      CHECK(std::abs(near.value - at) <= 1e-4 * std::abs(at));
    }
  }

  SUBCASE("jumps across the thresholds stay at input-error size") {
    const double alpha = 2.0;
    const double t0 = pole_environment(2.0, alpha, 2).theta0;
    for (const double edge : {ev.options().big_h, ev.options().small_h}) {
      for (const double side : {-1.0, 1.0}) {
        const double inside = t0 + side * edge * (1.0 - 1e-9);
        const double outside = t0 + side * edge * (1.0 + 1e-9);
        const Evaluation a = ev.evaluate(inside, alpha), c = ev.evaluate(outside, alpha);
        CHECK(a.branch != c.branch);
        CHECK(std::abs(a.value - c.value) <= 5.0 * fx.e_in * fx.scale);
      }
    }
  }
}

TEST_CASE("evaluator option validation") {
  const auto& fx = testing::fixture("square", 5.0);
  auto make = [&](EvaluatorOptions o) { StabilizedEvaluator(fx.model.basis, fx.model.solver->supplier(), o); };
  CHECK_THROWS_AS(make(EvaluatorOptions{0.01, 0.1, 20}), Error);
  CHECK_THROWS_AS(make(EvaluatorOptions{0.15, 0.0, 20}), Error);
  CHECK_THROWS_AS(make(EvaluatorOptions{0.15, 0.01, 0}), Error);
  CHECK_THROWS_AS(make(EvaluatorOptions{1.0, 0.9, 20}), Error);  // contour would leave the strip for p = 2
  CHECK_NOTHROW(make(EvaluatorOptions{0.1, 1e-3, 20}));
  CHECK(fx.model.evaluator->options().small_h <= strip_half_width(fx.model.basis->p()));
}

TEST_CASE("hatted derivatives follow the chain rule") {
  const auto& fx = testing::fixture("square", 5.0);
  const EmbeddingBasis& basis = *fx.model.basis;
  const cplx z(1.1, 0.05);
  const double h = 1e-4;
  for (std::size_t m = 0; m < 3; ++m) {
    const cplx fd1 = (basis.hatted(z + h, m) - basis.hatted(z - h, m)) / (2 * h);
    const cplx fd2 = (basis.hatted(z + h, m) - 2.0 * basis.hatted(z, m) + basis.hatted(z - h, m)) / (h * h);
    CHECK(std::abs(basis.hatted(z, m, 1) - fd1) <= 1e-6 * std::abs(fd1));
    CHECK(std::abs(basis.hatted(z, m, 2) - fd2) <= 1e-4 * std::abs(fd2));
  }
}
