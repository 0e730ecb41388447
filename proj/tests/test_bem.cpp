#include <doctest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/hankel.hpp>
#include <cmath>
#include <sstream>

#include "embedff/bem.hpp"
#include "embedff/errors.hpp"
#include "support.hpp"

using namespace embedff;

namespace {

// The abscissae can round onto the singular point itself; that single point carries no weight.
cplx kernel_oracle(double k, double r) {
  if (!(r > 0.0)) return 0.0;
  return 0.25 * cplx(0, 1) * boost::math::cyl_hankel_1(0, k * r);
}

// Oracle for the segment integral: tanh-sinh in each half around the foot of the perpendicular.
cplx segment_oracle(double k, const Point& x, const Point& a, const Point& b) {
  const double len = (b - a).norm();
  const Point t = (b - a) / len;
  const double foot = std::clamp((x - a).dot(t), 0.0, len);
  boost::math::quadrature::tanh_sinh<double> ts;
  auto part = [&](double lo, double hi, bool imag) {
    if (hi - lo <= 0.0) return 0.0;
    return ts.integrate(
        [&](double s) {
          const cplx v = kernel_oracle(k, (x - (a + s * t)).norm());
          return imag ? v.imag() : v.real();
        },
        lo, hi, 1e-13);
  };
  return {part(0.0, foot, false) + part(foot, len, false), part(0.0, foot, true) + part(foot, len, true)};
}

std::shared_ptr<const BemSystem> system_for(const std::string& shape, double k, double epw) {
  const RationalShape s = shape_preset(shape);
  return assemble_and_factor(s, k, build_mesh(s, k, MeshOptions{epw, 0.15, 8}));
}

Mesh reflect(const Mesh& mesh) {
  std::vector<Element> out;
  for (const auto& e : mesh.elements()) {
    out.push_back(Element{Point(e.end.x(), -e.end.y()), Point(e.start.x(), -e.start.y()), e.edge});
  }
  return Mesh(out, mesh.grading(), mesh.layers());
}

}  // namespace

TEST_CASE("screen mesh: size bound and geometric grading") {
  const RationalShape screen = shape_preset("screen");
  const Mesh mesh = build_mesh(screen, 10.0, MeshOptions{4.0, 0.15, 4});
  CHECK(mesh.max_element_length() <= kPi / 10.0);
  const auto& e = mesh.elements();
  for (int i = 0; i < 3; ++i) {
    CHECK(e[static_cast<std::size_t>(i)].length() / e[static_cast<std::size_t>(i + 1)].length() ==
          doctest::Approx(0.15).epsilon(1e-9));
    const std::size_t r = e.size() - 1 - static_cast<std::size_t>(i);
    CHECK(e[r].length() / e[r - 1].length() == doctest::Approx(0.15).epsilon(1e-9));
  }
  // Contiguous cover of the segment.
  double total = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    total += e[i].length();
    if (i > 0) CHECK((e[i].start - e[i - 1].end).norm() < 1e-15);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("mesh element counts") {
  for (const double k : {3.0, 10.0, 25.0}) {
    const std::size_t n1 = uniform_element_count(1.0, k, MeshOptions{10.0, 0.15, 8});
    const std::size_t n2 = uniform_element_count(1.0, k, MeshOptions{20.0, 0.15, 8});
    CAPTURE(k);
    CHECK(std::abs(static_cast<long>(n2) - 2 * static_cast<long>(n1)) <= 1);
  }
  // Square at k = 5: four edges, each with a uniform region and 2L graded elements.
  const MeshOptions opts{10.0, 0.15, 8};
  const Mesh mesh = build_mesh(shape_preset("square"), 5.0, opts);
  const double h_u = std::min(0.5, kTwoPi / (5.0 * 10.0));
  const double predicted = 4.0 * (1.0 / h_u + 2 * 8);
  CHECK(std::abs(static_cast<double>(mesh.size()) - predicted) <= 0.2 * predicted);
  CHECK(mesh.max_element_length() <= kPi / 5.0);

  try {
    uniform_element_count(1.0, 1.0, MeshOptions{2.0, 0.95, 40});
    FAIL("expected EmptyMesh");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyMesh);
  }
  CHECK_THROWS_AS(build_mesh(shape_preset("square"), -1.0), Error);
  CHECK_THROWS_AS(build_mesh(shape_preset("square"), 1.0, MeshOptions{1.0, 0.15, 8}), Error);
}

TEST_CASE("kernel integrals against tanh-sinh") {
  for (const double k : {1.0, 10.0, 40.0}) {
    for (const double a : {1e-6, 0.01, 0.3}) {
      const cplx got = integrate_kernel_from_zero(k, a);
      const cplx want = segment_oracle(k, Point(0, 0), Point(0, 0), Point(a, 0));
      CAPTURE(k);
      CAPTURE(a);
      CHECK(std::abs(got - want) <= 1e-10 * std::abs(want));
    }
  }
  const Point a(0.2, 0.1), b(0.5, 0.3);
  const Point mid = 0.5 * (a + b);
  const Point normal = Point(-(b - a).y(), (b - a).x()).normalized();
  for (const double k : {2.0, 20.0}) {
    for (const Point& x : {Point(mid), Point(a + 0.3 * (b - a)), Point(mid + 1e-3 * normal), Point(mid + 0.05 * normal),
                           Point(b + 0.01 * (b - a)), Point(3.0, -2.0)}) {
      const cplx got = integrate_kernel_segment(k, x, a, b);
      const cplx want = segment_oracle(k, x, a, b);
      CAPTURE(k);
      CAPTURE(x.transpose());
      CHECK(std::abs(got - want) <= 1e-9 * std::abs(want));
    }
  }
}

TEST_CASE("densities solve the collocation system") {
  auto sys = system_for("square", 5.0, 10.0);
  for (const double alpha : {0.0, 1.0, 4.0}) {
    auto f = solve_density(sys, alpha);
    CHECK(f->collocation_residual() <= 1e-10);
  }
  CHECK((sys->rhs(0.7) - sys->rhs(0.7 + kTwoPi)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(sys->relative_min_pivot() > 1e-14);
}

TEST_CASE("duplicated elements make the system singular") {
  const RationalShape s = shape_preset("screen");
  Mesh mesh = build_mesh(s, 2.0, MeshOptions{4.0, 0.15, 1});
  std::vector<Element> elements = mesh.elements();
  elements.push_back(elements.back());
  try {
    assemble_and_factor(s, 2.0, Mesh(elements, 0.15, 1));
    FAIL("expected SingularSystem");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularSystem);
  }
}

TEST_CASE("far field matches the scattered field at large radius") {
  auto sys = system_for("square", 5.0, 10.0);
  auto f = solve_density(sys, 0.4);
  const double k = 5.0, r = 1e4;
  const Point centre(0.5, 0.5);
  for (int i = 0; i < 24; ++i) {
    const double theta = kTwoPi * i / 24.0;
    const Point x = r * Point(std::cos(theta), std::sin(theta));
    const cplx us = f->scattered_field(x);
    const cplx predicted = std::sqrt(kTwoPi * k * r) * std::exp(cplx(0, -(k * r + kPi / 4))) * us;
    const cplx d = f->value(theta);
    CAPTURE(theta);
    CHECK(std::abs(d - predicted) <= 1e-3 * std::abs(d));
  }
  (void)centre;
}

TEST_CASE("optical theorem: total scattered power equals 4 pi Im D in the forward direction") {
  for (const char* name : {"square", "equilateral", "screen"}) {
    auto sys = system_for(name, 4.0, 20.0);
    for (const double alpha : {0.3, 2.0}) {
      auto f = solve_density(sys, alpha);
      const int n = 1000;
      double power = 0.0;
      for (int i = 0; i < n; ++i) power += std::norm(f->value(kTwoPi * i / n));
      power *= kTwoPi / n;
      const double forward = f->value(alpha + kPi).imag();
      CAPTURE(name);
      CAPTURE(alpha);
      CHECK(std::abs(power - 4.0 * kPi * forward) <= 2e-3 * power);
    }
  }
}

TEST_CASE("mirror symmetry") {
  // Reflecting the mesh in the horizontal axis maps D(theta, alpha) to D(-theta, -alpha).
  const double k = 5.0;
  auto sys = system_for("square", k, 10.0);
  auto mirrored = assemble_and_factor(sys->shape(), k, reflect(sys->mesh()));
  auto f = solve_density(sys, 0.0);
  auto g = solve_density(mirrored, 0.0);
  for (int i = 0; i < 16; ++i) {
    const double theta = kTwoPi * i / 16.0 + 0.1;
    CHECK(std::abs(g->value(theta) - f->value(kTwoPi - theta)) <= 1e-10 * std::abs(f->value(theta)));
  }
  // The unit square is symmetric about y = 1/2: D(theta, 0) = exp(-ik sin theta) D(2pi - theta, 0).
  for (int i = 0; i < 16; ++i) {
    const double theta = kTwoPi * i / 16.0 + 0.1;
    const cplx lhs = f->value(theta);
    const cplx rhs = std::exp(cplx(0, -k * std::sin(theta))) * f->value(kTwoPi - theta);
    CHECK(std::abs(lhs - rhs) <= 1e-9 * std::abs(lhs));
  }
}

TEST_CASE("screen far field focuses near pi +- alpha at high frequency") {
  auto sys = system_for("screen", 100.0, 10.0);
  const double alpha = kPi / 4;
  auto f = solve_density(sys, alpha);
  double best = 0.0, arg = 0.0;
  std::vector<double> lobes;
  for (int i = 0; i < 4000; ++i) {
    const double theta = kTwoPi * i / 4000.0;
    const double v = std::abs(f->value(theta));
    if (v > best) {
      best = v;
      arg = theta;
    }
  }
  const double d = std::min(angle_distance(arg, kPi - alpha), angle_distance(arg, kPi + alpha));
  CHECK(d < 0.05);
  // Both lobes carry comparable energy; away from them the pattern is much weaker.
  CHECK(std::abs(f->value(kPi - alpha)) > 0.5 * best);
  CHECK(std::abs(f->value(kPi + alpha)) > 0.5 * best);
  CHECK(std::abs(f->value(0.5 * kPi + 0.3)) < 0.2 * best);
}

TEST_CASE("far field periodicity, matrix form and derivatives") {
  auto sys = system_for("equilateral", 5.0, 10.0);
  auto f = solve_density(sys, 1.3);
  for (const cplx theta : {cplx(0.3, 0.0), cplx(2.0, 0.1), cplx(5.0, -0.2)}) {
    CHECK(std::abs(f->value(theta + kTwoPi) - f->value(theta)) <= 1e-12 * std::abs(f->value(theta)));
  }
  const std::vector<double> thetas{0.0, 0.9, 3.3};
  const CVec via_matrix = far_field_matrix(sys->mesh(), 5.0, thetas) * f->density();
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    CHECK(std::abs(via_matrix(static_cast<Eigen::Index>(i)) - f->value(thetas[i])) <= 1e-12 * std::abs(via_matrix(0)));
  }
  for (const cplx theta : {cplx(0.4, 0.0), cplx(2.5, 0.05), cplx(4.0, -0.1)}) {
    const double h1 = 1e-5, h2 = 1e-4;
    const cplx fd1 = (f->value(theta + h1) - f->value(theta - h1)) / (2 * h1);
    const cplx fd2 = (f->value(theta + h2) - 2.0 * f->value(theta) + f->value(theta - h2)) / (h2 * h2);
    const cplx d1 = far_field_derivative(*f, theta, 1);
    const cplx d2 = far_field_derivative(*f, theta, 2);
    CHECK(std::abs(d1 - fd1) <= 1e-6 * std::abs(d1));
    CHECK(std::abs(d2 - fd2) <= 1e-4 * std::abs(d2));
    CHECK(f->derivative(theta, 0) == f->value(theta));
  }
  CHECK_THROWS_AS(far_field_derivative(*f, 0.0, 3), Error);
  const CanonicalFarField zero(sys, 0.0, CVec::Zero(static_cast<Eigen::Index>(sys->size())));
  CHECK(std::abs(zero.derivative(cplx(1.0, 0.2), 1)) == 0.0);
  CHECK(std::abs(zero.derivative(cplx(1.0, 0.2), 2)) == 0.0);
  CHECK_THROWS_AS(CanonicalFarField(sys, 0.0, CVec::Zero(3)), Error);
}

TEST_CASE("boundary condition between collocation points improves under refinement") {
  double previous = 1e9;
  for (const double epw : {5.0, 10.0, 20.0}) {
    auto sys = system_for("square", 5.0, epw);
    auto f = solve_density(sys, 0.8);
    // Probe points sit at quarter positions of uniform-region elements away from corners.
    double worst = 0.0;
    for (const auto& e : sys->mesh().elements()) {
      const Point x = e.start + 0.25 * (e.end - e.start);
      const double to_corner = std::min({x.norm(), (x - Point(1, 0)).norm(), (x - Point(1, 1)).norm(),
                                         (x - Point(0, 1)).norm()});
      if (to_corner < 0.2) continue;
      worst = std::max(worst, std::abs(f->scattered_field(x) + incident_wave(5.0, 0.8, x)));
    }
    CAPTURE(epw);
    CHECK(worst < previous);
    previous = worst;
  }
  CHECK(previous < 0.05);
}

TEST_CASE("density CSV export") {
  auto sys = system_for("screen", 2.0, 4.0);
  auto f = solve_density(sys, 0.5);
  std::ostringstream out;
  f->write_density_csv(out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "index,real,imag");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == sys->size());
}
