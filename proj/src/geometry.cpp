#include "embedff/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "embedff/errors.hpp"

namespace embedff {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonRationalAngle: return "NonRationalAngle";
    case ErrorCode::SelfIntersecting: return "SelfIntersecting";
    case ErrorCode::DegenerateEdge: return "DegenerateEdge";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::OverdeterminedConstraints: return "OverdeterminedConstraints";
    case ErrorCode::CoincidentNodesWithoutDerivative: return "CoincidentNodesWithoutDerivative";
    case ErrorCode::EmptyMesh: return "EmptyMesh";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::PoleAtTheta: return "PoleAtTheta";
    case ErrorCode::DoublePoleInSimpleBranch: return "DoublePoleInSimpleBranch";
    case ErrorCode::PoleOnContour: return "PoleOnContour";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::ZeroColumnEncountered: return "ZeroColumnEncountered";
    case ErrorCode::SingularSubmatrix: return "SingularSubmatrix";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IOError: return "IOError";
  }
  return "Unknown";
}

bool is_numerical_failure(ErrorCode code) {
  switch (code) {
    case ErrorCode::SingularSystem:
    case ErrorCode::NoConvergence:
    case ErrorCode::ZeroColumnEncountered:
    case ErrorCode::SingularSubmatrix:
    case ErrorCode::PoleAtTheta:
    case ErrorCode::PoleOnContour:
    case ErrorCode::DoublePoleInSimpleBranch:
      return true;
    default:
      return false;
  }
}

RationalAngle::RationalAngle(long numerator, long denominator) {
  if (numerator <= 0 || denominator <= 0) {
    throw Error(ErrorCode::InvalidArgument, "rational angle needs positive numerator and denominator");
  }
  const long g = std::gcd(numerator, denominator);
  num_ = numerator / g;
  den_ = denominator / g;
}

RationalAngle rationalize_over_pi(double radians, long max_denominator) {
  const double x = radians / kPi;
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw Error(ErrorCode::NonRationalAngle, "angle must be positive and finite");
  }
  // Convergents h_n / k_n of the continued fraction of x.
  long h_prev = 1, h = static_cast<long>(std::floor(x));
  long k_prev = 0, k = 1;
  double rem = x - std::floor(x);
  for (int iter = 0; iter < 64 && rem > 1e-15; ++iter) {
    const double inv = 1.0 / rem;
    const long a = static_cast<long>(std::floor(inv));
    const long k_next = a * k + k_prev;
    if (k_next > max_denominator) break;
    const long h_next = a * h + h_prev;
    h_prev = h;
    h = h_next;
    k_prev = k;
    k = k_next;
    rem = inv - static_cast<double>(a);
  }
  if (h <= 0) throw Error(ErrorCode::NonRationalAngle, "angle rounds to zero");
  return RationalAngle(h, k);
}

RationalData derive_rational_data(const std::vector<RationalAngle>& exterior_angles) {
  if (exterior_angles.empty()) {
    throw Error(ErrorCode::InvalidArgument, "no exterior angles");
  }
  RationalData out;
  long p = 1;
  for (const auto& w : exterior_angles) {
    // pi < omega <= 2pi  <=>  den < num <= 2 den
    if (w.numerator() <= w.denominator() || w.numerator() > 2 * w.denominator()) {
      throw Error(ErrorCode::InvalidArgument,
                  "exterior angle " + std::to_string(w.numerator()) + "pi/" +
                      std::to_string(w.denominator()) + " outside (pi, 2pi]");
    }
    p = std::lcm(p, w.denominator());
  }
  out.p = static_cast<int>(p);
  out.q.reserve(exterior_angles.size());
  for (const auto& w : exterior_angles) {
    const long qj = w.numerator() * (p / w.denominator());
    out.q.push_back(static_cast<int>(qj));
    out.M += static_cast<int>(qj) - 1;
  }
  return out;
}

std::size_t RationalShape::edge_count() const {
  return kind_ == ShapeKind::Screen ? 1 : vertices_.size();
}

std::pair<Point, Point> RationalShape::edge(std::size_t j) const {
  if (kind_ == ShapeKind::Screen) return {vertices_[0], vertices_[1]};
  return {vertices_[j], vertices_[(j + 1) % vertices_.size()]};
}

namespace {

double cross(const Point& a, const Point& b) { return a.x() * b.y() - a.y() * b.x(); }

bool segments_intersect(const Point& a, const Point& b, const Point& c, const Point& d, double eps) {
  auto orient = [](const Point& p, const Point& q, const Point& r) { return cross(q - p, r - p); };
  auto on_segment = [eps](const Point& p, const Point& q, const Point& r) {
    return std::min(p.x(), q.x()) - eps <= r.x() && r.x() <= std::max(p.x(), q.x()) + eps &&
           std::min(p.y(), q.y()) - eps <= r.y() && r.y() <= std::max(p.y(), q.y()) + eps;
  };
  const double o1 = orient(a, b, c), o2 = orient(a, b, d);
  const double o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (((o1 > eps && o2 < -eps) || (o1 < -eps && o2 > eps)) &&
      ((o3 > eps && o4 < -eps) || (o3 < -eps && o4 > eps))) {
    return true;
  }
  if (std::abs(o1) <= eps && on_segment(a, b, c)) return true;
  if (std::abs(o2) <= eps && on_segment(a, b, d)) return true;
  if (std::abs(o3) <= eps && on_segment(c, d, a)) return true;
  if (std::abs(o4) <= eps && on_segment(c, d, b)) return true;
  return false;
}

}  // namespace

RationalShape shape_from_vertices(std::vector<Point> vertices, ShapeKind kind,
                                  const ShapeOptions& options) {
  const std::size_t n = vertices.size();
  if (kind == ShapeKind::Screen && n != 2) {
    throw Error(ErrorCode::InvalidArgument, "a screen needs exactly 2 vertices");
  }
  if (kind == ShapeKind::Polygon && n < 3) {
    throw Error(ErrorCode::InvalidArgument, "a polygon needs at least 3 vertices");
  }
  for (const auto& v : vertices) {
    if (!v.allFinite()) throw Error(ErrorCode::InvalidArgument, "non-finite vertex");
  }

  double scale = 0.0;
  for (const auto& v : vertices) scale = std::max(scale, v.cwiseAbs().maxCoeff());
  scale = std::max(scale, 1.0);
  const std::size_t n_edges = kind == ShapeKind::Screen ? 1 : n;
  for (std::size_t j = 0; j < n_edges; ++j) {
    if ((vertices[(j + 1) % n] - vertices[j]).norm() <= 1e-12 * scale) {
      throw Error(ErrorCode::DegenerateEdge, "edge " + std::to_string(j) + " has zero length");
    }
  }

  RationalShape shape;
  shape.kind_ = kind;
  std::vector<RationalAngle> angles;

  if (kind == ShapeKind::Polygon) {
    double area2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) area2 += cross(vertices[j], vertices[(j + 1) % n]);
    if (area2 < 0.0) std::reverse(vertices.begin(), vertices.end());

    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (j == i + 1 || (i == 0 && j == n - 1)) continue;
        if (segments_intersect(vertices[i], vertices[(i + 1) % n], vertices[j], vertices[(j + 1) % n],
                               1e-12 * scale * scale)) {
          throw Error(ErrorCode::SelfIntersecting,
                      "edges " + std::to_string(i) + " and " + std::to_string(j) + " intersect");
        }
      }
    }

    angles.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Point e_in = vertices[i] - vertices[(i + n - 1) % n];
      const Point e_out = vertices[(i + 1) % n] - vertices[i];
      const double turn = std::atan2(cross(e_in, e_out), e_in.dot(e_out));
      const double omega = kPi + turn;
      if (omega <= kPi + options.angle_tolerance) {
        throw Error(ErrorCode::InvalidArgument,
                    "vertex " + std::to_string(i) + " has exterior angle <= pi (non-convex or collinear)");
      }
      const RationalAngle r = rationalize_over_pi(omega, options.max_denominator);
      if (std::abs(r.radians() - omega) > options.angle_tolerance) {
        throw Error(ErrorCode::NonRationalAngle,
                    "vertex " + std::to_string(i) + " angle " + std::to_string(omega) +
                        " has no fraction of pi within tolerance");
      }
      angles.push_back(r);
    }
  } else {
    angles = {RationalAngle(2, 1), RationalAngle(2, 1)};
  }

  // Longest edge becomes the horizontal one; ties go to the lowest index.
  std::size_t best = 0;
  double best_len = 0.0;
  for (std::size_t j = 0; j < n_edges; ++j) {
    const double len = (vertices[(j + 1) % n] - vertices[j]).norm();
    if (len > best_len * (1.0 + 1e-12)) {
      best = j;
      best_len = len;
    }
  }
  std::rotate(vertices.begin(), vertices.begin() + static_cast<std::ptrdiff_t>(best), vertices.end());
  std::rotate(angles.begin(), angles.begin() + static_cast<std::ptrdiff_t>(best), angles.end());

  const Point origin = vertices[0];
  const Point dir = (vertices[1] - vertices[0]) / best_len;
  Eigen::Matrix2d rot;
  rot << dir.x(), dir.y(), -dir.y(), dir.x();
  for (auto& v : vertices) v = rot * (v - origin);
  vertices[0] = Point(0.0, 0.0);
  vertices[1] = Point(best_len, 0.0);

  shape.data_ = derive_rational_data(angles);
  shape.vertices_ = std::move(vertices);
  shape.angles_ = std::move(angles);
  return shape;
}

namespace {

std::vector<Point> regular_polygon(int sides) {
  std::vector<Point> v;
  Point cur(0.0, 0.0);
  double heading = 0.0;
  for (int i = 0; i < sides; ++i) {
    v.push_back(cur);
    cur += Point(std::cos(heading), std::sin(heading));
    heading += kTwoPi / sides;
  }
  return v;
}

}  // namespace

std::vector<std::string> shape_preset_names() {
  return {"square", "equilateral", "isosceles-right", "screen", "pentagon"};
}

RationalShape shape_preset(const std::string& name) {
  if (name == "square") return shape_from_vertices(regular_polygon(4), ShapeKind::Polygon);
  if (name == "equilateral") return shape_from_vertices(regular_polygon(3), ShapeKind::Polygon);
  if (name == "pentagon") return shape_from_vertices(regular_polygon(5), ShapeKind::Polygon);
  if (name == "isosceles-right") {
    return shape_from_vertices({Point(0, 0), Point(1, 0), Point(0, 1)}, ShapeKind::Polygon);
  }
  if (name == "screen") return shape_from_vertices({Point(0, 0), Point(1, 0)}, ShapeKind::Screen);
  throw Error(ErrorCode::ConfigError, "unknown shape preset '" + name + "'");
}

RationalShape parse_geometry(const std::string& text, const ShapeOptions& options) {
  std::istringstream in(text);
  std::string line;
  bool have_kind = false;
  ShapeKind kind = ShapeKind::Polygon;
  std::vector<Point> vertices;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    line = line.substr(first);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
      line.pop_back();
    }
    if (line.rfind("kind", 0) == 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw Error(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": expected kind=...");
      }
      std::string value = line.substr(eq + 1);
      value.erase(0, value.find_first_not_of(" \t"));
      if (value == "polygon") {
        kind = ShapeKind::Polygon;
      } else if (value == "screen") {
        kind = ShapeKind::Screen;
      } else {
        throw Error(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": unknown kind '" + value + "'");
      }
      have_kind = true;
      continue;
    }
    std::istringstream ls(line);
    std::string tag;
    double x = 0.0, y = 0.0;
    ls >> tag;
    if (tag != "vertex" || !(ls >> x >> y)) {
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": expected 'vertex x y'");
    }
    std::string extra;
    if (ls >> extra) {
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": trailing tokens");
    }
    vertices.emplace_back(x, y);
  }
  if (!have_kind) throw Error(ErrorCode::ConfigError, "geometry is missing the kind= line");
  return shape_from_vertices(std::move(vertices), kind, options);
}

RationalShape load_geometry_file(const std::string& path, const ShapeOptions& options) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::IOError, "cannot open geometry file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_geometry(ss.str(), options);
}

}  // namespace embedff
