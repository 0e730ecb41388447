#include "support.hpp"

#include <boost/math/constants/constants.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <map>
#include <mutex>
#include <tuple>

namespace testing {

namespace mp = boost::multiprecision;
using Big = mp::cpp_bin_float_50;

cplx hankel1_series_50(int order, double xd) {
  const Big x = xd;
  const Big half = x / 2;
  const Big q = half * half;
  const Big pi = boost::math::constants::pi<Big>();
  const Big gamma = boost::math::constants::euler<Big>();
  const Big eps = std::numeric_limits<Big>::epsilon();

  // J_n(x) = sum (-1)^k (x/2)^(2k+n) / (k! (k+n)!)
  Big j = 0, term = order == 0 ? Big(1) : half;
  for (int k = 0; k < 2000; ++k) {
    if (k > 0) term *= -q / (Big(k) * Big(k + order));
    j += term;
    if (k > 2 * xd && abs(term) < eps * 1e-10) break;
  }

  Big y = 0;
  if (order == 0) {
    // Y_0 = (2/pi)(ln(x/2) + gamma) J_0 + (2/pi) sum_{k>=1} (-1)^(k+1) H_k (x^2/4)^k / (k!)^2
    Big sum = 0, t = 1, harmonic = 0;
    for (int k = 1; k < 2000; ++k) {
      t *= -q / (Big(k) * Big(k));
      harmonic += Big(1) / k;
      sum -= harmonic * t;
      if (k > 2 * xd && abs(harmonic * t) < eps * 1e-10) break;
    }
    y = 2 / pi * ((log(half) + gamma) * j + sum);
  } else {
    // Y_1 = -2/(pi x) + (2/pi) ln(x/2) J_1 - (1/pi) sum (-1)^k (psi(k+1) + psi(k+2)) (x/2)^(2k+1) / (k! (k+1)!)
    Big sum = 0, t = half, h_k = 0;
    for (int k = 0; k < 2000; ++k) {
      if (k > 0) {
        t *= -q / (Big(k) * Big(k + 1));
        h_k += Big(1) / k;
      }
      const Big psi_sum = (h_k - gamma) + (h_k + Big(1) / (k + 1) - gamma);
      sum += psi_sum * t;
      if (k > 2 * xd && abs(psi_sum * t) < eps * 1e-10) break;
    }
    y = -2 / (pi * x) + 2 / pi * log(half) * j - sum / pi;
  }
  return {static_cast<double>(j), static_cast<double>(y)};
}

const Fixture& fixture(const std::string& shape, double k, double epw, int mtilde, embedff::Strategy strategy) {
  using Key = std::tuple<std::string, double, double, int, int>;
  static std::map<Key, std::unique_ptr<Fixture>> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  const Key key{shape, k, epw, mtilde, static_cast<int>(strategy)};
  auto it = cache.find(key);
  if (it != cache.end()) return *it->second;

  const embedff::RationalShape s = embedff::shape_preset(shape);
  const int count = mtilde > 0 ? mtilde : embedff::default_mtilde(s.M());
  embedff::MeshOptions mesh{epw, 0.15, 8};
  auto f = std::make_unique<Fixture>();
  f->shape = shape;
  f->k = k;
  f->epw = epw;
  f->model = embedff::build_model(s, k, mesh, embedff::canonical_angles("equispaced", count, 0.0),
                                  embedff::SolverOptions{strategy, 1e-8}, embedff::EvaluatorOptions{}, 1);
  f->reference =
      embedff::assemble_and_factor(s, k, embedff::build_mesh(s, k, embedff::refined_options(mesh, 2)), 1);
  f->e_in = embedff::input_error(f->model, *f->reference, 1000);
  const std::vector<double> thetas = embedff::equispaced_angles(1000);
  embedff::CMat rhs(static_cast<Eigen::Index>(f->reference->size()), 1);
  double scale = 0.0;
  for (const double a : f->model.basis->angles()) {
    rhs.col(0) = f->reference->rhs(a);
    const embedff::CMat d =
        embedff::far_field_matrix(f->reference->mesh(), k, thetas) * f->reference->solve(rhs);
    scale = std::max(scale, d.cwiseAbs().maxCoeff());
  }
  f->scale = scale;
  return *cache.emplace(key, std::move(f)).first->second;
}

TableField::TableField(std::vector<double> angles, std::size_t column, std::vector<std::vector<cplx>> entries, int p)
    : angles_(std::move(angles)), column_(column), entries_(std::move(entries)), p_(p) {}

cplx TableField::value(cplx theta) const {
  std::size_t row = 0;
  for (std::size_t m = 1; m < angles_.size(); ++m) {
    if (embedff::angle_distance(theta.real(), angles_[m]) < embedff::angle_distance(theta.real(), angles_[row])) row = m;
  }
  const cplx lam = embedff::lambda(theta, angles_[column_], p_);
  return entries_[row][column_] / lam;
}

cplx TableField::derivative(cplx theta, int order) const { return order == 0 ? value(theta) : cplx{}; }

std::shared_ptr<const embedff::EmbeddingBasis> table_basis(const std::vector<double>& angles,
                                                           const std::vector<std::vector<cplx>>& entries, int p,
                                                           int M) {
  std::vector<std::shared_ptr<const embedff::FarFieldPattern>> fields;
  for (std::size_t m = 0; m < angles.size(); ++m) fields.push_back(std::make_shared<TableField>(angles, m, entries, p));
  return std::make_shared<const embedff::EmbeddingBasis>(p, M, std::move(fields));
}

embedff::CMat random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal;
  embedff::CMat x(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) x(i, j) = cplx(normal(rng), normal(rng));
  }
  return x;
}

}  // namespace testing
