#pragma once

#include <iosfwd>
#include <memory>
#include <vector>

#include "embedff/geometry.hpp"
#include "embedff/types.hpp"

namespace embedff {

struct Element {
  Point start;
  Point end;
  std::size_t edge = 0;

  double length() const { return (end - start).norm(); }
  Point midpoint() const { return 0.5 * (start + end); }
  Point tangent() const { return (end - start) / length(); }
};

struct MeshOptions {
  double elements_per_wavelength = 10.0;
  double grading = 0.15;
  int layers = 8;
};

class Mesh {
 public:
  Mesh(std::vector<Element> elements, double grading, int layers)
      : elements_(std::move(elements)), grading_(grading), layers_(layers) {}

  const std::vector<Element>& elements() const { return elements_; }
  std::size_t size() const { return elements_.size(); }
  const Element& operator[](std::size_t i) const { return elements_[i]; }
  double grading() const { return grading_; }
  int layers() const { return layers_; }
  double max_element_length() const;

 private:
  std::vector<Element> elements_;
  double grading_;
  int layers_;
};

/// Corner-graded mesh: on each edge, a uniform central region with element length
/// h_u = min(edge/2, 2pi/(k*elements_per_wavelength)), flanked at both ends by `layers`
/// elements of lengths h_u*sigma^i, i = 1..layers, shrinking toward the corner.
Mesh build_mesh(const RationalShape& shape, double k, const MeshOptions& options = {});

/// Number of uniform-region elements placed on an edge of the given length.
std::size_t uniform_element_count(double edge_length, double k, const MeshOptions& options);

/// Integral of (i/4) H0(k t) over t in [0, a].
cplx integrate_kernel_from_zero(double k, double a);

/// Integral of (i/4) H0(k |x - y|) over the segment y in [a, b]; handles x on or near the segment.
cplx integrate_kernel_segment(double k, const Point& x, const Point& a, const Point& b);

/// Dense single-layer collocation system with a stored LU factorization.
class BemSystem {
 public:
  BemSystem(std::shared_ptr<const RationalShape> shape, double k, Mesh mesh, int threads = 1);

  const RationalShape& shape() const { return *shape_; }
  double k() const { return k_; }
  const Mesh& mesh() const { return mesh_; }
  std::size_t size() const { return mesh_.size(); }
  const CMat& matrix() const { return matrix_; }
  /// Smallest |U_ii| of the LU factors relative to max |A_ij|.
  double relative_min_pivot() const { return relative_min_pivot_; }

  /// Collocation right-hand side for the boundary condition S d = u^i.
  CVec rhs(double alpha) const;
  CVec solve(const CVec& rhs) const;
  CMat solve(const CMat& rhs) const;

  /// Single-layer potential (S d)(x) at an arbitrary point.
  cplx single_layer(const CVec& density, const Point& x) const;

 private:
  std::shared_ptr<const RationalShape> shape_;
  double k_;
  Mesh mesh_;
  CMat matrix_;
  Eigen::PartialPivLU<CMat> lu_;
  double relative_min_pivot_ = 0.0;
};

/// Assembles and factors the system; throws SingularSystem on pivot breakdown.
std::shared_ptr<const BemSystem> assemble_and_factor(const RationalShape& shape, double k, const Mesh& mesh,
                                                     int threads = 1);

/// Incident plane wave exp(-i k (x1 cos a + x2 sin a)).
cplx incident_wave(double k, double alpha, const Point& x);

/// A far-field pattern as an entire function of the observation angle.
class FarFieldPattern {
 public:
  virtual ~FarFieldPattern() = default;
  virtual double incident_angle() const = 0;
  virtual cplx value(cplx theta) const = 0;
  /// d^order/dtheta^order, order in {0, 1, 2}.
  virtual cplx derivative(cplx theta, int order) const = 0;
};

/// Far field of one solved incident angle.
class CanonicalFarField final : public FarFieldPattern {
 public:
  CanonicalFarField(std::shared_ptr<const BemSystem> system, double alpha, CVec density);

  double incident_angle() const override { return alpha_; }
  cplx value(cplx theta) const override;
  cplx derivative(cplx theta, int order) const override;

  const CVec& density() const { return density_; }
  const BemSystem& system() const { return *system_; }

  /// Scattered field u^s = -S d at x.
  cplx scattered_field(const Point& x) const;
  /// ||A d - rhs||_inf / ||rhs||_inf.
  double collocation_residual() const;

  /// Writes `index,real,imag` rows.
  void write_density_csv(std::ostream& out) const;

 private:
  std::shared_ptr<const BemSystem> system_;
  double alpha_;
  CVec density_;
};

std::shared_ptr<const CanonicalFarField> solve_density(std::shared_ptr<const BemSystem> system, double alpha);
std::vector<std::shared_ptr<const CanonicalFarField>> solve_densities(std::shared_ptr<const BemSystem> system,
                                                                      const std::vector<double>& alphas);

cplx far_field(const FarFieldPattern& field, cplx theta);
cplx far_field_derivative(const FarFieldPattern& field, cplx theta, int order);

/// Matrix W with W(i, j) = contribution of element j to D(theta_i); D = W * density.
CMat far_field_matrix(const Mesh& mesh, double k, const std::vector<double>& thetas);

}  // namespace embedff
