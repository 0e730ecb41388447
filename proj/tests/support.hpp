#pragma once

#include <complex>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "embedff/experiments.hpp"

namespace testing {

using embedff::cplx;

/// J_n(x) + i Y_n(x) for n in {0, 1}, summed from the ascending series in 50-digit arithmetic.
cplx hankel1_series_50(int order, double x);

/// A solved model shared between test cases: shape, k, mesh density and canonical angle count
/// identify it. Built once per process.
struct Fixture {
  std::string shape;
  double k;
  double epw;
  embedff::EmbeddingModel model;
  std::shared_ptr<const embedff::BemSystem> reference;
  double e_in;
  /// max |D_ref| over the input-error sample grid.
  double scale;
};

const Fixture& fixture(const std::string& shape, double k, double epw = 10.0, int mtilde = 0,
                       embedff::Strategy strategy = embedff::Strategy::Two);

/// Far field of an explicitly supplied table: value(theta) returns entries[row(theta)][column]
/// divided by Lambda(theta, alpha_column), where row(theta) is the nearest canonical angle. Lets
/// tests prescribe the system matrix exactly.
class TableField final : public embedff::FarFieldPattern {
 public:
  TableField(std::vector<double> angles, std::size_t column, std::vector<std::vector<cplx>> entries, int p);
  double incident_angle() const override { return angles_[column_]; }
  cplx value(cplx theta) const override;
  cplx derivative(cplx theta, int order) const override;

 private:
  std::vector<double> angles_;
  std::size_t column_;
  std::vector<std::vector<cplx>> entries_;
  int p_;
};

std::shared_ptr<const embedff::EmbeddingBasis> table_basis(const std::vector<double>& angles,
                                                           const std::vector<std::vector<cplx>>& entries, int p,
                                                           int M);

/// Complex matrix with independent standard normal real and imaginary parts.
embedff::CMat random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols);

}  // namespace testing
