#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "embedff/bem.hpp"
#include "embedff/coefficients.hpp"
#include "embedff/embedding.hpp"
#include "embedff/geometry.hpp"

namespace embedff {

/// Flat `key = value` configuration with dotted keys. Command-line flags are applied on top
/// through set().
struct ExperimentConfig {
  std::string shape = "square";
  std::string geometry_file;
  double k = 10.0;
  MeshOptions bem{20.0, 0.15, 8};
  int reference_refinements = 2;
  int mtilde = 0;  // 0 selects ceil(3M/2)
  Strategy strategy = Strategy::Two;
  double delta = 1e-8;
  EvaluatorOptions evaluator;
  std::string angle_set = "equispaced";  // equispaced | screen-degenerate | triangle-offset
  double angle_offset = 0.0;
  double alpha = 1.25 * kPi;
  int n_theta = 200;
  int n_alpha = 200;
  bool large_grid = false;
  int spot_checks = 5;
  int n_samples = 1000;
  std::string out = "-";
  std::uint64_t seed = 1;
  int threads = 0;
  std::vector<int> study_mtilde;
  std::vector<double> study_deltas{1e-12, 1e-8, 1e-4};
  std::vector<double> study_offsets;
  std::vector<double> table_k{5.0, 10.0};
  std::vector<std::string> table_shapes{"square", "equilateral"};
  std::vector<double> table_epw{10.0, 20.0, 40.0};

  /// Sets one key; throws ConfigError for unknown keys or malformed values.
  void set(const std::string& key, const std::string& value);
  /// Checks every field; throws ConfigError.
  void validate() const;
  /// One `key = value` line per field, in a fixed order, parseable by parse_config.
  std::string serialize() const;
};

ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {});

/// Desk-scale wavenumber caps.
inline constexpr double kMaxPolygonK = 50.0;
inline constexpr double kMaxScreenK = 200.0;

RationalShape resolve_shape(const ExperimentConfig& config);
/// Canonical angles of the configured set; `count` of them.
std::vector<double> canonical_angles(const std::string& set, int count, double offset);
int default_mtilde(int M);

/// Everything needed to evaluate the embedding formula for one discretization.
struct EmbeddingModel {
  std::shared_ptr<const BemSystem> system;
  std::vector<std::shared_ptr<const CanonicalFarField>> fields;
  std::shared_ptr<const EmbeddingBasis> basis;
  std::shared_ptr<const CoefficientSolver> solver;
  std::shared_ptr<const StabilizedEvaluator> evaluator;
};

EmbeddingModel build_model(const RationalShape& shape, double k, const MeshOptions& mesh,
                           const std::vector<double>& angles, const SolverOptions& solver,
                           const EvaluatorOptions& evaluator, int threads);
/// Same far fields, restricted to the first `count` angles, with a fresh solver.
EmbeddingModel restrict_model(const EmbeddingModel& model, std::size_t count, const SolverOptions& solver,
                              const EvaluatorOptions& evaluator);

MeshOptions refined_options(const MeshOptions& options, int refinements);

std::vector<double> equispaced_angles(int n);

/// Relative sup-norm input error over `n_samples` equispaced observation angles, comparing
/// every canonical far field of the model with the reference system's solution.
double input_error(const EmbeddingModel& model, const BemSystem& reference, int n_samples);

struct GridEvaluation {
  std::vector<double> thetas;
  std::vector<double> alphas;
  CMat approx;     // n_theta x n_alpha
  CMat reference;  // n_theta x n_alpha
  std::array<long, kBranchCount> branch_counts{};
  double max_b_norm = 0.0;
};

GridEvaluation evaluate_grid(const EmbeddingModel& model, const BemSystem& reference, const std::vector<double>& thetas,
                             const std::vector<double>& alphas, int threads);

double relative_sup_error(const CMat& approx, const CMat& reference);

struct ErrorReport {
  std::size_t n = 0;
  std::size_t n_ref = 0;
  double e_in = 0.0;
  double e_out = 0.0;
  double ratio = 0.0;
  double condition = 0.0;
  double b_norm = 0.0;
  std::array<long, kBranchCount> branch_counts{};
  double wall_seconds = 0.0;
};

struct SweepRow {
  double theta;
  double naive_abs;
  double stabilized_abs;
  double naive_rel;
  double stabilized_rel;
  Branch branch;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double e_in = 0.0;
  std::vector<double> poles;  // zeros of Lambda(., alpha) in [0, 2pi)
};

SweepResult run_sweep(const ExperimentConfig& config);
ErrorReport run_error_report(const ExperimentConfig& config);

/// Subcommands. Each writes CSV (header plus a leading `#` metadata block) to `out`.
void cmd_sweep(const ExperimentConfig& config, std::ostream& out);
void cmd_grid(const ExperimentConfig& config, std::ostream& out, std::ostream* spot_out);
void cmd_oversampling_study(const ExperimentConfig& config, std::ostream& out);
void cmd_table(const ExperimentConfig& config, std::ostream& out);

/// `# key = value` metadata lines: command, version, timestamp and the config echo. The
/// timestamp honors SOURCE_DATE_EPOCH so repeated runs can be byte-identical.
void write_metadata(std::ostream& out, const std::string& command, const ExperimentConfig& config);

std::string format_number(double value);

}  // namespace embedff
