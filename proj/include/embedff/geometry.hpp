#pragma once

#include <string>
#include <vector>

#include "embedff/types.hpp"

namespace embedff {

/// An angle numerator*pi/denominator, stored as a reduced fraction.
class RationalAngle {
 public:
  RationalAngle(long numerator, long denominator);

  long numerator() const { return num_; }
  long denominator() const { return den_; }
  double radians() const { return static_cast<double>(num_) * kPi / static_cast<double>(den_); }

  friend bool operator==(const RationalAngle&, const RationalAngle&) = default;

 private:
  long num_;
  long den_;
};

/// Best rational approximation x ~ n/d with d <= max_denominator (continued fractions).
RationalAngle rationalize_over_pi(double radians, long max_denominator);

struct RationalData {
  int p = 0;
  std::vector<int> q;
  int M = 0;
};

/// p = smallest positive integer with pi/p dividing every exterior angle, q_j = omega_j p / pi,
/// M = sum (q_j - 1). Angles must lie in (pi, 2pi].
RationalData derive_rational_data(const std::vector<RationalAngle>& exterior_angles);

enum class ShapeKind { Polygon, Screen };

struct ShapeOptions {
  double angle_tolerance = 1e-6;
  long max_denominator = 64;
};

/// A sound-soft rational polygon or screen, normalized so that one edge lies on the positive
/// horizontal axis starting at the origin, vertices counter-clockwise.
class RationalShape {
 public:
  ShapeKind kind() const { return kind_; }
  const std::vector<Point>& vertices() const { return vertices_; }
  const std::vector<RationalAngle>& exterior_angles() const { return angles_; }
  int p() const { return data_.p; }
  const std::vector<int>& q() const { return data_.q; }
  int M() const { return data_.M; }

  /// Number of straight edges (a screen has one).
  std::size_t edge_count() const;
  std::pair<Point, Point> edge(std::size_t j) const;

  friend RationalShape shape_from_vertices(std::vector<Point> vertices, ShapeKind kind,
                                           const ShapeOptions& options);

 private:
  ShapeKind kind_ = ShapeKind::Polygon;
  std::vector<Point> vertices_;
  std::vector<RationalAngle> angles_;
  RationalData data_;
};

RationalShape shape_from_vertices(std::vector<Point> vertices, ShapeKind kind,
                                  const ShapeOptions& options = {});

/// Named presets with unit side length: square, equilateral, isosceles-right, screen, pentagon.
RationalShape shape_preset(const std::string& name);
std::vector<std::string> shape_preset_names();

/// Plain-text geometry: a `kind=polygon|screen` line followed by `vertex x y` lines.
/// Blank lines and lines starting with '#' are ignored.
RationalShape parse_geometry(const std::string& text, const ShapeOptions& options = {});
RationalShape load_geometry_file(const std::string& path, const ShapeOptions& options = {});

}  // namespace embedff
