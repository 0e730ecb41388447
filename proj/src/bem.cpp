#include "embedff/bem.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "embedff/errors.hpp"
#include "embedff/parallel.hpp"
#include "embedff/specfun.hpp"

namespace embedff {

namespace {

constexpr cplx kI{0.0, 1.0};

cplx kernel(double k, double r) { return 0.25 * kI * hankel1(0, k * r); }

double point_segment_distance(const Point& x, const Point& a, const Point& b) {
  const Point d = b - a;
  const double t = std::clamp((x - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
  return (x - (a + t * d)).norm();
}

cplx integrate_regular(double k, const Point& x, const Point& a, const Point& b, int depth) {
  const double len = (b - a).norm();
  const double dist = point_segment_distance(x, a, b);
  if (dist < len && depth < 60) {
    const Point mid = 0.5 * (a + b);
    return integrate_regular(k, x, a, mid, depth + 1) + integrate_regular(k, x, mid, b, depth + 1);
  }
  int order = std::max(4, static_cast<int>(std::ceil(k * len)) + 4);
  if (dist < 2.0 * len) order += 4;
  const QuadratureRule& rule = gauss_legendre(std::min(order, 200));
  return rule.integrate([&](double s) { return kernel(k, (x - (a + s * (b - a))).norm()); }, 0.0, 1.0) * len;
}

cplx sinc(cplx z) {
  if (std::abs(z) < 1e-4) {
    const cplx z2 = z * z;
    return 1.0 - z2 / 6.0 + z2 * z2 / 120.0;
  }
  return std::sin(z) / z;
}

}  // namespace

double Mesh::max_element_length() const {
  double longest = 0.0;
  for (const auto& e : elements_) longest = std::max(longest, e.length());
  return longest;
}

namespace {

double uniform_target(double edge_length, double k, const MeshOptions& options) {
  return std::min(0.5 * edge_length, kTwoPi / (k * options.elements_per_wavelength));
}

double graded_span(double h_u, const MeshOptions& options) {
  double total = 0.0;
  for (int i = 1; i <= options.layers; ++i) total += h_u * std::pow(options.grading, i);
  return total;
}

void validate(double k, const MeshOptions& options) {
  if (!(k > 0.0) || !std::isfinite(k)) throw Error(ErrorCode::InvalidArgument, "wavenumber must be positive");
  if (!(options.elements_per_wavelength >= 2.0)) {
    throw Error(ErrorCode::InvalidArgument, "elements per wavelength must be at least 2");
  }
  if (!(options.grading > 0.0 && options.grading < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "grading parameter must lie in (0, 1)");
  }
  if (options.layers < 0) throw Error(ErrorCode::InvalidArgument, "layer count must be non-negative");
}

}  // namespace

std::size_t uniform_element_count(double edge_length, double k, const MeshOptions& options) {
  validate(k, options);
  const double h_u = uniform_target(edge_length, k, options);
  const double span = edge_length - 2.0 * graded_span(h_u, options);
  if (!(span > 0.0)) throw Error(ErrorCode::EmptyMesh, "edge too short for the requested grading layers");
  return static_cast<std::size_t>(std::max(1.0, std::ceil(span / h_u - 1e-9)));
}

Mesh build_mesh(const RationalShape& shape, double k, const MeshOptions& options) {
  validate(k, options);
  std::vector<Element> elements;
  for (std::size_t j = 0; j < shape.edge_count(); ++j) {
    const auto [a, b] = shape.edge(j);
    const double len = (b - a).norm();
    const double h_u = uniform_target(len, k, options);
    const std::size_t n_u = uniform_element_count(len, k, options);
    const double span = len - 2.0 * graded_span(h_u, options);

    std::vector<double> lengths;
    for (int i = options.layers; i >= 1; --i) lengths.push_back(h_u * std::pow(options.grading, i));
    for (std::size_t i = 0; i < n_u; ++i) lengths.push_back(span / static_cast<double>(n_u));
    for (int i = 1; i <= options.layers; ++i) lengths.push_back(h_u * std::pow(options.grading, i));

    double position = 0.0;
    Point start = a;
    for (std::size_t i = 0; i < lengths.size(); ++i) {
      position += lengths[i];
      const Point end = (i + 1 == lengths.size()) ? b : Point(a + (position / len) * (b - a));
      elements.push_back(Element{start, end, j});
      start = end;
    }
  }
  if (elements.empty()) throw Error(ErrorCode::EmptyMesh, "shape produced no elements");
  return Mesh(std::move(elements), options.grading, options.layers);
}

cplx integrate_kernel_from_zero(double k, double a) {
  if (a <= 0.0) return 0.0;
  // (i/4) H0(kt) = -(1/2pi) ln t + S(t) with S bounded; the log part is exact.
  cplx total = -(a * std::log(a) - a) / kTwoPi;
  auto smooth = [k](double t) { return kernel(k, t) + std::log(t) / kTwoPi; };
  double hi = a;
  for (int panel = 0; panel < 24; ++panel) {
    const double lo = 0.25 * hi;
    const int order = std::min(200, std::max(8, static_cast<int>(std::ceil(k * (hi - lo))) + 6));
    total += gauss_legendre(order).integrate(smooth, lo, hi);
    hi = lo;
  }
  return total;
}

cplx integrate_kernel_segment(double k, const Point& x, const Point& a, const Point& b) {
  const double len = (b - a).norm();
  const Point t = (b - a) / len;
  const Point rel = x - a;
  const double along = rel.dot(t);
  const double perp = std::abs(rel.x() * t.y() - rel.y() * t.x());
  // Rounding in `perp` scales with the absolute coordinates, which dwarf the tiny graded
  // elements next to corners on slanted edges.
  if (perp <= 1e-12 * (len + x.norm() + a.norm()) && along >= 0.0 && along <= len) {
    return integrate_kernel_from_zero(k, along) + integrate_kernel_from_zero(k, len - along);
  }
  return integrate_regular(k, x, a, b, 0);
}

cplx incident_wave(double k, double alpha, const Point& x) {
  const double phase = -k * (x.x() * std::cos(alpha) + x.y() * std::sin(alpha));
  return {std::cos(phase), std::sin(phase)};
}

BemSystem::BemSystem(std::shared_ptr<const RationalShape> shape, double k, Mesh mesh, int threads)
    : shape_(std::move(shape)), k_(k), mesh_(std::move(mesh)) {
  const auto n = static_cast<Eigen::Index>(mesh_.size());
  matrix_.resize(n, n);
  parallel_for(mesh_.size(), resolve_threads(threads), [&](std::size_t i) {
    const Point x = mesh_[i].midpoint();
    for (std::size_t j = 0; j < mesh_.size(); ++j) {
      matrix_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          integrate_kernel_segment(k_, x, mesh_[j].start, mesh_[j].end);
    }
  });
  lu_.compute(matrix_);
  const double scale = matrix_.cwiseAbs().maxCoeff();
  const double pivot = lu_.matrixLU().diagonal().cwiseAbs().minCoeff();
  relative_min_pivot_ = pivot / scale;
  if (!(relative_min_pivot_ >= 1e-14)) {
    throw Error(ErrorCode::SingularSystem, "LU pivot " + std::to_string(relative_min_pivot_) +
                                               " relative to the matrix scale; k may sit on a spurious resonance");
  }
}

CVec BemSystem::rhs(double alpha) const {
  CVec b(static_cast<Eigen::Index>(size()));
  for (std::size_t i = 0; i < size(); ++i) b(static_cast<Eigen::Index>(i)) = incident_wave(k_, alpha, mesh_[i].midpoint());
  return b;
}

CVec BemSystem::solve(const CVec& rhs) const { return lu_.solve(rhs); }

CMat BemSystem::solve(const CMat& rhs) const { return lu_.solve(rhs); }

cplx BemSystem::single_layer(const CVec& density, const Point& x) const {
  cplx sum = 0.0;
  for (std::size_t j = 0; j < size(); ++j) {
    sum += density(static_cast<Eigen::Index>(j)) * integrate_kernel_segment(k_, x, mesh_[j].start, mesh_[j].end);
  }
  return sum;
}

std::shared_ptr<const BemSystem> assemble_and_factor(const RationalShape& shape, double k, const Mesh& mesh,
                                                     int threads) {
  if (!(k > 0.0)) throw Error(ErrorCode::InvalidArgument, "wavenumber must be positive");
  if (mesh.size() == 0) throw Error(ErrorCode::EmptyMesh, "mesh has no elements");
  return std::make_shared<const BemSystem>(std::make_shared<const RationalShape>(shape), k, mesh, threads);
}

CanonicalFarField::CanonicalFarField(std::shared_ptr<const BemSystem> system, double alpha, CVec density)
    : system_(std::move(system)), alpha_(alpha), density_(std::move(density)) {
  if (static_cast<std::size_t>(density_.size()) != system_->size()) {
    throw Error(ErrorCode::InvalidArgument, "density length does not match the mesh");
  }
}

cplx CanonicalFarField::value(cplx theta) const {
  const double k = system_->k();
  const cplx c = std::cos(theta), s = std::sin(theta);
  cplx sum = 0.0;
  const Mesh& mesh = system_->mesh();
  for (std::size_t j = 0; j < mesh.size(); ++j) {
    const Element& e = mesh[j];
    const Point mid = e.midpoint();
    const Point t = e.tangent();
    const double len = e.length();
    const cplx phase = -kI * k * (c * mid.x() + s * mid.y());
    const cplx arg = 0.5 * k * len * (c * t.x() + s * t.y());
    sum += density_(static_cast<Eigen::Index>(j)) * len * std::exp(phase) * sinc(arg);
  }
  return -0.5 * sum;
}

cplx CanonicalFarField::derivative(cplx theta, int order) const {
  if (order == 0) return value(theta);
  if (order != 1 && order != 2) throw Error(ErrorCode::InvalidArgument, "derivative order must be 0, 1 or 2");
  const double k = system_->k();
  const cplx c = std::cos(theta), s = std::sin(theta);
  const double stretch = std::cosh(theta.imag());
  cplx sum = 0.0;
  const Mesh& mesh = system_->mesh();
  for (std::size_t j = 0; j < mesh.size(); ++j) {
    const Element& e = mesh[j];
    const double len = e.length();
    const QuadratureRule& rule = gauss_legendre(std::min(200, 8 + static_cast<int>(std::ceil(k * len * stretch))));
    const cplx piece = rule.integrate(
        [&](double u) {
          const Point y = e.start + u * (e.end - e.start);
          const cplx dot = c * y.x() + s * y.y();
          const cplx dot1 = -s * y.x() + c * y.y();
          const cplx f = std::exp(-kI * k * dot);
          const cplx g1 = -kI * k * dot1;
          if (order == 1) return g1 * f;
          return (g1 * g1 + kI * k * dot) * f;
        },
        0.0, 1.0);
    sum += density_(static_cast<Eigen::Index>(j)) * len * piece;
  }
  return -0.5 * sum;
}

cplx CanonicalFarField::scattered_field(const Point& x) const { return -system_->single_layer(density_, x); }

double CanonicalFarField::collocation_residual() const {
  const CVec b = system_->rhs(alpha_);
  return (system_->matrix() * density_ - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff();
}

void CanonicalFarField::write_density_csv(std::ostream& out) const {
  out << "index,real,imag\n";
  out.precision(17);
  for (Eigen::Index i = 0; i < density_.size(); ++i) {
    out << i << ',' << density_(i).real() << ',' << density_(i).imag() << '\n';
  }
}

std::shared_ptr<const CanonicalFarField> solve_density(std::shared_ptr<const BemSystem> system, double alpha) {
  if (!std::isfinite(alpha)) throw Error(ErrorCode::InvalidArgument, "incident angle must be finite");
  CVec d = system->solve(system->rhs(alpha));
  return std::make_shared<const CanonicalFarField>(std::move(system), alpha, std::move(d));
}

std::vector<std::shared_ptr<const CanonicalFarField>> solve_densities(std::shared_ptr<const BemSystem> system,
                                                                      const std::vector<double>& alphas) {
  std::vector<std::shared_ptr<const CanonicalFarField>> out;
  if (alphas.empty()) return out;
  CMat rhs(static_cast<Eigen::Index>(system->size()), static_cast<Eigen::Index>(alphas.size()));
  for (std::size_t m = 0; m < alphas.size(); ++m) {
    if (!std::isfinite(alphas[m])) throw Error(ErrorCode::InvalidArgument, "incident angle must be finite");
    rhs.col(static_cast<Eigen::Index>(m)) = system->rhs(alphas[m]);
  }
  const CMat d = system->solve(rhs);
  for (std::size_t m = 0; m < alphas.size(); ++m) {
    out.push_back(std::make_shared<const CanonicalFarField>(system, alphas[m], d.col(static_cast<Eigen::Index>(m))));
  }
  return out;
}

cplx far_field(const FarFieldPattern& field, cplx theta) { return field.value(theta); }

cplx far_field_derivative(const FarFieldPattern& field, cplx theta, int order) {
  if (order != 1 && order != 2) throw Error(ErrorCode::InvalidArgument, "derivative order must be 1 or 2");
  return field.derivative(theta, order);
}

CMat far_field_matrix(const Mesh& mesh, double k, const std::vector<double>& thetas) {
  CMat w(static_cast<Eigen::Index>(thetas.size()), static_cast<Eigen::Index>(mesh.size()));
  for (std::size_t j = 0; j < mesh.size(); ++j) {
    const Element& e = mesh[j];
    const Point mid = e.midpoint();
    const Point t = e.tangent();
    const double len = e.length();
    for (std::size_t i = 0; i < thetas.size(); ++i) {
      const double c = std::cos(thetas[i]), s = std::sin(thetas[i]);
      const double phase = -k * (c * mid.x() + s * mid.y());
      w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          -0.5 * len * cplx(std::cos(phase), std::sin(phase)) * sinc(0.5 * k * len * (c * t.x() + s * t.y()));
    }
  }
  return w;
}

}  // namespace embedff
