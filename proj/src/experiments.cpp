#include "embedff/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "embedff/errors.hpp"
#include "embedff/parallel.hpp"

namespace embedff {

namespace {

constexpr const char* kVersion = "1.0.0";

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw Error(ErrorCode::ConfigError, "invalid value '" + value + "' for key '" + key + "'");
}

double parse_double(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v == "pi") return kPi;
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) bad_value(key, value);
    return x;
  } catch (const std::logic_error&) {
    bad_value(key, value);
  }
}

long parse_long(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  try {
    std::size_t used = 0;
    const long x = std::stol(v, &used);
    if (used != v.size()) bad_value(key, value);
    return x;
  } catch (const std::logic_error&) {
    bad_value(key, value);
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, value);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

template <typename T, typename F>
std::string join(const std::vector<T>& items, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += fmt(items[i]);
  }
  return out;
}

void config_check(bool ok, const std::string& message) {
  if (!ok) throw Error(ErrorCode::ConfigError, message);
}

}  // namespace

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  return buf;
}

void ExperimentConfig::set(const std::string& raw_key, const std::string& value) {
  const std::string key = trim(raw_key);
  if (key == "shape") {
    shape = trim(value);
  } else if (key == "geometry_file") {
    geometry_file = trim(value);
  } else if (key == "k") {
    k = parse_double(key, value);
  } else if (key == "bem.elements_per_wavelength") {
    bem.elements_per_wavelength = parse_double(key, value);
  } else if (key == "bem.grading") {
    bem.grading = parse_double(key, value);
  } else if (key == "bem.layers") {
    bem.layers = static_cast<int>(parse_long(key, value));
  } else if (key == "bem.reference_refinements") {
    reference_refinements = static_cast<int>(parse_long(key, value));
  } else if (key == "embedding.mtilde") {
    mtilde = static_cast<int>(parse_long(key, value));
  } else if (key == "embedding.strategy") {
    const long s = parse_long(key, value);
    if (s != 1 && s != 2) bad_value(key, value);
    strategy = static_cast<Strategy>(s);
  } else if (key == "embedding.delta") {
    delta = parse_double(key, value);
  } else if (key == "embedding.big_h") {
    evaluator.big_h = parse_double(key, value);
  } else if (key == "embedding.small_h") {
    evaluator.small_h = parse_double(key, value);
  } else if (key == "embedding.rule_order") {
    evaluator.rule_order = static_cast<int>(parse_long(key, value));
  } else if (key == "embedding.angle_set") {
    angle_set = trim(value);
  } else if (key == "embedding.angle_offset") {
    angle_offset = parse_double(key, value);
  } else if (key == "sweep.alpha") {
    alpha = parse_double(key, value);
  } else if (key == "grid.n_theta") {
    n_theta = static_cast<int>(parse_long(key, value));
  } else if (key == "grid.n_alpha") {
    n_alpha = static_cast<int>(parse_long(key, value));
  } else if (key == "grid.large") {
    large_grid = parse_bool(key, value);
  } else if (key == "grid.spot_checks") {
    spot_checks = static_cast<int>(parse_long(key, value));
  } else if (key == "errors.n_samples") {
    n_samples = static_cast<int>(parse_long(key, value));
  } else if (key == "output.path") {
    out = trim(value);
  } else if (key == "seed") {
    const long s = parse_long(key, value);
    if (s < 0) bad_value(key, value);
    seed = static_cast<std::uint64_t>(s);
  } else if (key == "threads") {
    threads = static_cast<int>(parse_long(key, value));
  } else if (key == "study.mtilde") {
    study_mtilde.clear();
    for (const auto& item : split_list(value)) study_mtilde.push_back(static_cast<int>(parse_long(key, item)));
  } else if (key == "study.delta") {
    study_deltas.clear();
    for (const auto& item : split_list(value)) study_deltas.push_back(parse_double(key, item));
  } else if (key == "study.offsets") {
    study_offsets.clear();
    for (const auto& item : split_list(value)) study_offsets.push_back(parse_double(key, item));
  } else if (key == "table.k") {
    table_k.clear();
    for (const auto& item : split_list(value)) table_k.push_back(parse_double(key, item));
  } else if (key == "table.shapes") {
    table_shapes = split_list(value);
  } else if (key == "table.elements_per_wavelength") {
    table_epw.clear();
    for (const auto& item : split_list(value)) table_epw.push_back(parse_double(key, item));
  } else {
    throw Error(ErrorCode::ConfigError, "unknown configuration key '" + key + "'");
  }
}

void ExperimentConfig::validate() const {
  if (geometry_file.empty()) {
    const auto names = shape_preset_names();
    config_check(std::find(names.begin(), names.end(), shape) != names.end(), "unknown shape preset '" + shape + "'");
  }
  config_check(std::isfinite(k) && k > 0.0, "k must be positive");
  config_check(bem.elements_per_wavelength >= 2.0, "bem.elements_per_wavelength must be at least 2");
  config_check(bem.grading > 0.0 && bem.grading < 1.0, "bem.grading must lie in (0, 1)");
  config_check(bem.layers >= 0 && bem.layers <= 40, "bem.layers must lie in [0, 40]");
  config_check(reference_refinements >= 0 && reference_refinements <= 4, "bem.reference_refinements must lie in [0, 4]");
  config_check(mtilde >= 0, "embedding.mtilde must be non-negative");
  config_check(std::isfinite(delta) && delta > 0.0, "embedding.delta must be positive");
  config_check(evaluator.small_h > 0.0 && evaluator.small_h < evaluator.big_h, "thresholds must satisfy 0 < small_h < big_h");
  config_check(evaluator.big_h < kPi, "embedding.big_h must be below pi");
  config_check(evaluator.rule_order >= 1 && evaluator.rule_order <= 200, "embedding.rule_order must lie in [1, 200]");
  config_check(angle_set == "equispaced" || angle_set == "screen-degenerate" || angle_set == "triangle-offset",
               "unknown angle set '" + angle_set + "'");
  config_check(std::isfinite(angle_offset), "embedding.angle_offset must be finite");
  config_check(std::isfinite(alpha), "sweep.alpha must be finite");
  config_check(n_theta >= 1 && n_theta <= 1000 && n_alpha >= 1 && n_alpha <= 1000, "grid sizes must lie in [1, 1000]");
  config_check(spot_checks >= 0, "grid.spot_checks must be non-negative");
  config_check(n_samples >= 8 && n_samples <= 100000, "errors.n_samples must lie in [8, 100000]");
  config_check(!out.empty(), "output.path must not be empty");
  config_check(threads >= 0, "threads must be non-negative");
  for (const int m : study_mtilde) config_check(m >= 1, "study.mtilde entries must be positive");
  for (const double d : study_deltas) config_check(std::isfinite(d) && d > 0.0, "study.delta entries must be positive");
  for (const double a : study_offsets) config_check(std::isfinite(a), "study.offsets entries must be finite");
  for (const double kk : table_k) config_check(std::isfinite(kk) && kk > 0.0, "table.k entries must be positive");
  for (const double e : table_epw) config_check(e >= 2.0, "table.elements_per_wavelength entries must be at least 2");
  const auto names = shape_preset_names();
  for (const auto& s : table_shapes) {
    config_check(std::find(names.begin(), names.end(), s) != names.end(), "unknown table shape '" + s + "'");
  }
  config_check(!table_k.empty() && !table_shapes.empty() && !table_epw.empty(), "table lists must not be empty");
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream out;
  auto num = [](double x) { return format_number(x); };
  out << "shape = " << shape << '\n';
  if (!geometry_file.empty()) out << "geometry_file = " << geometry_file << '\n';
  out << "k = " << num(k) << '\n';
  out << "bem.elements_per_wavelength = " << num(bem.elements_per_wavelength) << '\n';
  out << "bem.grading = " << num(bem.grading) << '\n';
  out << "bem.layers = " << bem.layers << '\n';
  out << "bem.reference_refinements = " << reference_refinements << '\n';
  out << "embedding.mtilde = " << mtilde << '\n';
  out << "embedding.strategy = " << static_cast<int>(strategy) << '\n';
  out << "embedding.delta = " << num(delta) << '\n';
  out << "embedding.big_h = " << num(evaluator.big_h) << '\n';
  out << "embedding.small_h = " << num(evaluator.small_h) << '\n';
  out << "embedding.rule_order = " << evaluator.rule_order << '\n';
  out << "embedding.angle_set = " << angle_set << '\n';
  out << "embedding.angle_offset = " << num(angle_offset) << '\n';
  out << "sweep.alpha = " << num(alpha) << '\n';
  out << "grid.n_theta = " << n_theta << '\n';
  out << "grid.n_alpha = " << n_alpha << '\n';
  out << "grid.large = " << (large_grid ? "true" : "false") << '\n';
  out << "grid.spot_checks = " << spot_checks << '\n';
  out << "errors.n_samples = " << n_samples << '\n';
  out << "output.path = " << this->out << '\n';
  out << "seed = " << seed << '\n';
  out << "threads = " << threads << '\n';
  out << "study.mtilde = " << join(study_mtilde, [](int m) { return std::to_string(m); }) << '\n';
  out << "study.delta = " << join(study_deltas, num) << '\n';
  out << "study.offsets = " << join(study_offsets, num) << '\n';
  out << "table.k = " << join(table_k, num) << '\n';
  out << "table.shapes = " << join(table_shapes, [](const std::string& s) { return s; }) << '\n';
  out << "table.elements_per_wavelength = " << join(table_epw, num) << '\n';
  return out.str();
}

ExperimentConfig parse_config(const std::string& text, ExperimentConfig base) {
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(number) + ": expected 'key = value'");
    }
    base.set(t.substr(0, eq), t.substr(eq + 1));
  }
  return base;
}

ExperimentConfig load_config(const std::string& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IOError, "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

RationalShape resolve_shape(const ExperimentConfig& config) {
  if (!config.geometry_file.empty()) return load_geometry_file(config.geometry_file);
  return shape_preset(config.shape);
}

int default_mtilde(int M) { return (3 * M + 1) / 2; }

std::vector<double> equispaced_angles(int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = kTwoPi * i / n;
  return out;
}

std::vector<double> canonical_angles(const std::string& set, int count, double offset) {
  if (count < 1) throw Error(ErrorCode::ConfigError, "need at least one canonical angle");
  std::vector<double> out;
  if (set == "equispaced") {
    for (int m = 0; m < count; ++m) out.push_back(reduce_angle(offset + kTwoPi * m / count));
  } else if (set == "screen-degenerate") {
    static const double list[] = {kPi / 2, 3 * kPi / 2, kPi, 0.0, 3 * kPi / 4, 5 * kPi / 4};
    if (count > 6) throw Error(ErrorCode::ConfigError, "screen-degenerate angle set has only 6 angles");
    out.assign(list, list + count);
  } else if (set == "triangle-offset") {
    if (count > 24) throw Error(ErrorCode::ConfigError, "triangle-offset angle set has only 24 angles");
    for (int m = 0; m < count; ++m) {
      const double base = offset + (m % 12) * kPi / 6;
      out.push_back(reduce_angle(m < 12 ? base : base + kPi / 12));
    }
  } else {
    throw Error(ErrorCode::ConfigError, "unknown angle set '" + set + "'");
  }
  return out;
}

MeshOptions refined_options(const MeshOptions& options, int refinements) {
  MeshOptions out = options;
  out.elements_per_wavelength = options.elements_per_wavelength * std::pow(2.0, refinements);
  return out;
}

EmbeddingModel build_model(const RationalShape& shape, double k, const MeshOptions& mesh,
                           const std::vector<double>& angles, const SolverOptions& solver,
                           const EvaluatorOptions& evaluator, int threads) {
  EmbeddingModel model;
  model.system = assemble_and_factor(shape, k, build_mesh(shape, k, mesh), threads);
  model.fields = solve_densities(model.system, angles);
  return restrict_model(model, model.fields.size(), solver, evaluator);
}

EmbeddingModel restrict_model(const EmbeddingModel& model, std::size_t count, const SolverOptions& solver,
                              const EvaluatorOptions& evaluator) {
  if (count < 1 || count > model.fields.size()) throw Error(ErrorCode::InvalidArgument, "invalid field count");
  EmbeddingModel out;
  out.system = model.system;
  out.fields.assign(model.fields.begin(), model.fields.begin() + static_cast<std::ptrdiff_t>(count));
  std::vector<std::shared_ptr<const FarFieldPattern>> patterns(out.fields.begin(), out.fields.end());
  const RationalShape& shape = model.system->shape();
  out.basis = std::make_shared<const EmbeddingBasis>(shape.p(), shape.M(), std::move(patterns));
  out.solver = std::make_shared<const CoefficientSolver>(out.basis, solver);
  auto solver_ptr = out.solver;
  out.evaluator = std::make_shared<const StabilizedEvaluator>(
      out.basis, [solver_ptr](double a) { return solver_ptr->coefficients_for(a).values; }, evaluator);
  return out;
}

namespace {

CMat density_matrix(const std::vector<std::shared_ptr<const CanonicalFarField>>& fields) {
  CMat d(fields.front()->density().size(), static_cast<Eigen::Index>(fields.size()));
  for (std::size_t m = 0; m < fields.size(); ++m) d.col(static_cast<Eigen::Index>(m)) = fields[m]->density();
  return d;
}

CMat reference_densities(const BemSystem& reference, const std::vector<double>& alphas) {
  CMat rhs(static_cast<Eigen::Index>(reference.size()), static_cast<Eigen::Index>(alphas.size()));
  for (std::size_t j = 0; j < alphas.size(); ++j) rhs.col(static_cast<Eigen::Index>(j)) = reference.rhs(alphas[j]);
  return reference.solve(rhs);
}

}  // namespace

double relative_sup_error(const CMat& approx, const CMat& reference) {
  const double scale = reference.cwiseAbs().maxCoeff();
  double worst = 0.0;
  for (Eigen::Index j = 0; j < approx.cols(); ++j) {
    for (Eigen::Index i = 0; i < approx.rows(); ++i) {
      const double e = std::abs(approx(i, j) - reference(i, j));
      if (!std::isfinite(e)) return std::numeric_limits<double>::infinity();
      worst = std::max(worst, e);
    }
  }
  return worst / scale;
}

double input_error(const EmbeddingModel& model, const BemSystem& reference, int n_samples) {
  const std::vector<double> thetas = equispaced_angles(n_samples);
  const CMat coarse = far_field_matrix(model.system->mesh(), model.system->k(), thetas) * density_matrix(model.fields);
  const CMat fine = far_field_matrix(reference.mesh(), reference.k(), thetas) *
                    reference_densities(reference, model.basis->angles());
  return relative_sup_error(coarse, fine);
}

GridEvaluation evaluate_grid(const EmbeddingModel& model, const BemSystem& reference, const std::vector<double>& thetas,
                             const std::vector<double>& alphas, int threads) {
  GridEvaluation grid;
  grid.thetas = thetas;
  grid.alphas = alphas;
  const CMat canonical = far_field_matrix(model.system->mesh(), model.system->k(), thetas) * density_matrix(model.fields);
  grid.reference = far_field_matrix(reference.mesh(), reference.k(), thetas) * reference_densities(reference, alphas);
  grid.approx.resize(static_cast<Eigen::Index>(thetas.size()), static_cast<Eigen::Index>(alphas.size()));

  std::vector<std::array<long, kBranchCount>> counts(alphas.size());
  std::vector<double> norms(alphas.size(), 0.0);
  // Selecting the strategy-two subset up front keeps the parallel section free of first-use work.
  if (model.solver->options().strategy == Strategy::Two) model.solver->subset();
  parallel_for(alphas.size(), resolve_threads(threads), [&](std::size_t j) {
    const CVec b = model.solver->coefficients_for(alphas[j]).values;
    norms[j] = b.norm();
    counts[j].fill(0);
    CVec row(canonical.cols());
    for (std::size_t i = 0; i < thetas.size(); ++i) {
      row = canonical.row(static_cast<Eigen::Index>(i)).transpose();
      const Evaluation ev = model.evaluator->evaluate(thetas[i], alphas[j], b, &row);
      grid.approx(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = ev.value;
      ++counts[j][static_cast<std::size_t>(ev.branch)];
    }
  });
  for (std::size_t j = 0; j < alphas.size(); ++j) {
    for (int b = 0; b < kBranchCount; ++b) grid.branch_counts[static_cast<std::size_t>(b)] += counts[j][static_cast<std::size_t>(b)];
    grid.max_b_norm = std::max(grid.max_b_norm, norms[j]);
  }
  return grid;
}

namespace {

struct Prepared {
  RationalShape shape;
  std::vector<double> angles;
  SolverOptions solver;
};

Prepared prepare(const ExperimentConfig& config) {
  config.validate();
  RationalShape shape = resolve_shape(config);
  const double cap = shape.kind() == ShapeKind::Screen ? kMaxScreenK : kMaxPolygonK;
  config_check(config.k <= cap, "k exceeds the desk-scale cap of " + format_number(cap) + " for this shape");
  const int mtilde = config.mtilde > 0 ? config.mtilde : default_mtilde(shape.M());
  config_check(mtilde >= shape.M(), "embedding.mtilde must be at least M = " + std::to_string(shape.M()));
  Prepared out{std::move(shape), canonical_angles(config.angle_set, mtilde, config.angle_offset), {}};
  out.solver.strategy = config.strategy;
  out.solver.delta = config.delta;
  return out;
}

void check_grid_size(const ExperimentConfig& config) {
  config_check(config.large_grid || (config.n_theta <= 200 && config.n_alpha <= 200),
               "grids above 200 x 200 need grid.large = true");
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

ErrorReport run_error_report(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const Prepared prep = prepare(config);
  const EmbeddingModel model =
      build_model(prep.shape, config.k, config.bem, prep.angles, prep.solver, config.evaluator, config.threads);
  const auto reference = assemble_and_factor(prep.shape, config.k,
                                             build_mesh(prep.shape, config.k,
                                                        refined_options(config.bem, config.reference_refinements)),
                                             config.threads);
  ErrorReport report;
  report.n = model.system->size();
  report.n_ref = reference->size();
  report.e_in = input_error(model, *reference, config.n_samples);
  const GridEvaluation grid = evaluate_grid(model, *reference, equispaced_angles(config.n_theta),
                                            equispaced_angles(config.n_alpha), config.threads);
  report.e_out = relative_sup_error(grid.approx, grid.reference);
  report.ratio = report.e_out / report.e_in;
  report.condition = model.solver->inverted_condition();
  report.b_norm = grid.max_b_norm;
  report.branch_counts = grid.branch_counts;
  report.wall_seconds = seconds_since(start);
  return report;
}

SweepResult run_sweep(const ExperimentConfig& config) {
  const Prepared prep = prepare(config);
  const EmbeddingModel model =
      build_model(prep.shape, config.k, config.bem, prep.angles, prep.solver, config.evaluator, config.threads);
  const auto reference = assemble_and_factor(prep.shape, config.k,
                                             build_mesh(prep.shape, config.k,
                                                        refined_options(config.bem, config.reference_refinements)),
                                             config.threads);
  SweepResult result;
  result.e_in = input_error(model, *reference, config.n_samples);
  const double alpha = config.alpha;
  const std::vector<double> thetas = equispaced_angles(config.n_theta);
  const CMat ref = far_field_matrix(reference->mesh(), reference->k(), thetas) * reference_densities(*reference, {alpha});
  const CMat canonical = far_field_matrix(model.system->mesh(), model.system->k(), thetas) * density_matrix(model.fields);
  const double scale = ref.cwiseAbs().maxCoeff();
  const CVec b = model.solver->coefficients_for(alpha).values;
  result.rows.resize(thetas.size());
  parallel_for(thetas.size(), resolve_threads(config.threads), [&](std::size_t i) {
    const CVec row = canonical.row(static_cast<Eigen::Index>(i)).transpose();
    const cplx exact = ref(static_cast<Eigen::Index>(i), 0);
    double naive_abs = std::numeric_limits<double>::infinity();
    try {
      naive_abs = std::abs(naive_eval(*model.basis, b, thetas[i], alpha, &row) - exact);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::PoleAtTheta) throw;
    }
    if (!std::isfinite(naive_abs)) naive_abs = std::numeric_limits<double>::infinity();
    const Evaluation ev = model.evaluator->evaluate(thetas[i], alpha, b, &row);
    const double stab_abs = std::abs(ev.value - exact);
    result.rows[i] = SweepRow{thetas[i], naive_abs, stab_abs, naive_abs / scale, stab_abs / scale, ev.branch};
  });
  for (const double pole : poles_in_interval(alpha, prep.shape.p(), 0.0, kTwoPi)) {
    if (pole < kTwoPi - kAngleTolerance) result.poles.push_back(pole);
  }
  return result;
}

void write_metadata(std::ostream& out, const std::string& command, const ExperimentConfig& config) {
  std::time_t stamp = std::time(nullptr);
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    char* end = nullptr;
    const long long v = std::strtoll(epoch, &end, 10);
    if (end && *end == '\0' && end != epoch) stamp = static_cast<std::time_t>(v);
  }
  std::tm tm{};
  gmtime_r(&stamp, &tm);
  char when[32];
  std::strftime(when, sizeof when, "%Y-%m-%dT%H:%M:%SZ", &tm);
  out << "# command = " << command << '\n';
  out << "# version = " << kVersion << '\n';
  out << "# timestamp = " << when << '\n';
  std::istringstream lines(config.serialize());
  std::string line;
  while (std::getline(lines, line)) out << "# " << line << '\n';
}

void cmd_sweep(const ExperimentConfig& config, std::ostream& out) {
  const SweepResult result = run_sweep(config);
  write_metadata(out, "sweep", config);
  out << "# e_in = " << format_number(result.e_in) << '\n';
  out << "theta,naive_abs_error,stabilized_abs_error,naive_rel_error,stabilized_rel_error,branch\n";
  for (const auto& r : result.rows) {
    out << format_number(r.theta) << ',' << format_number(r.naive_abs) << ',' << format_number(r.stabilized_abs) << ','
        << format_number(r.naive_rel) << ',' << format_number(r.stabilized_rel) << ',' << to_string(r.branch) << '\n';
  }
}

void cmd_grid(const ExperimentConfig& config, std::ostream& out, std::ostream* spot_out) {
  check_grid_size(config);
  const Prepared prep = prepare(config);
  const EmbeddingModel model =
      build_model(prep.shape, config.k, config.bem, prep.angles, prep.solver, config.evaluator, config.threads);
  const auto reference = assemble_and_factor(prep.shape, config.k,
                                             build_mesh(prep.shape, config.k,
                                                        refined_options(config.bem, config.reference_refinements)),
                                             config.threads);
  const std::vector<double> thetas = equispaced_angles(config.n_theta);
  const std::vector<double> alphas = equispaced_angles(config.n_alpha);
  const GridEvaluation grid = evaluate_grid(model, *reference, thetas, alphas, config.threads);

  // Spot-check columns: a seeded selection of distinct alpha indices.
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> columns(alphas.size());
  for (std::size_t j = 0; j < columns.size(); ++j) columns[j] = j;
  const std::size_t picks = std::min<std::size_t>(static_cast<std::size_t>(config.spot_checks), columns.size());
  for (std::size_t j = 0; j < picks; ++j) {
    const std::size_t r = j + static_cast<std::size_t>(rng() % (columns.size() - j));
    std::swap(columns[j], columns[r]);
  }
  columns.resize(picks);
  std::sort(columns.begin(), columns.end());

  write_metadata(out, "grid", config);
  out << "# rows are theta, columns are alpha; values are log|D(theta, alpha)|\n";
  out << "theta";
  for (const double a : alphas) out << ',' << format_number(a);
  out << '\n';
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    out << format_number(thetas[i]);
    for (std::size_t j = 0; j < alphas.size(); ++j) {
      out << ',' << format_number(std::log(std::abs(grid.approx(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)))));
    }
    out << '\n';
  }
  if (spot_out) {
    write_metadata(*spot_out, "grid-spot-check", config);
    *spot_out << "theta,alpha,relative_error\n";
    for (const std::size_t j : columns) {
      for (std::size_t i = 0; i < thetas.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const auto jj = static_cast<Eigen::Index>(j);
        const double rel = std::abs(grid.approx(ii, jj) - grid.reference(ii, jj)) / std::abs(grid.reference(ii, jj));
        *spot_out << format_number(thetas[i]) << ',' << format_number(alphas[j]) << ',' << format_number(rel) << '\n';
      }
    }
  }
}

void cmd_oversampling_study(const ExperimentConfig& config, std::ostream& out) {
  check_grid_size(config);
  const Prepared prep = prepare(config);
  const int M = prep.shape.M();
  std::vector<int> sizes = config.study_mtilde;
  if (sizes.empty()) {
    const int cap = config.angle_set == "screen-degenerate" ? 6 : config.angle_set == "triangle-offset" ? 24 : M + 4;
    for (int m = M; m <= std::min(cap, M + 4); ++m) sizes.push_back(m);
  }
  for (const int m : sizes) config_check(m >= M, "study.mtilde entries must be at least M = " + std::to_string(M));
  const int largest = *std::max_element(sizes.begin(), sizes.end());
  std::vector<double> offsets = config.study_offsets;
  if (offsets.empty()) offsets.push_back(config.angle_offset);

  const auto reference = assemble_and_factor(prep.shape, config.k,
                                             build_mesh(prep.shape, config.k,
                                                        refined_options(config.bem, config.reference_refinements)),
                                             config.threads);
  const std::vector<double> thetas = equispaced_angles(config.n_theta);
  const std::vector<double> alphas = equispaced_angles(config.n_alpha);

  write_metadata(out, "study-oversampling", config);
  out << "offset,mtilde,strategy,delta,e_in,e_out,b_norm,condition,status\n";
  std::shared_ptr<const BemSystem> system;
  for (const double offset : offsets) {
    const std::vector<double> angles = canonical_angles(config.angle_set, largest, offset);
    EmbeddingModel full;
    if (!system) {
      full = build_model(prep.shape, config.k, config.bem, angles, SolverOptions{}, config.evaluator, config.threads);
      system = full.system;
    } else {
      full.system = system;
      full.fields = solve_densities(system, angles);
    }
    for (const int m : sizes) {
      std::vector<SolverOptions> variants{SolverOptions{Strategy::Two, config.delta}};
      for (const double d : config.study_deltas) variants.push_back(SolverOptions{Strategy::One, d});
      double e_in = std::numeric_limits<double>::quiet_NaN();
      for (const SolverOptions& variant : variants) {
        double e_out = std::numeric_limits<double>::quiet_NaN();
        double b_norm = std::numeric_limits<double>::quiet_NaN();
        double cond = std::numeric_limits<double>::quiet_NaN();
        std::string status = "ok";
        try {
          const EmbeddingModel model = restrict_model(full, static_cast<std::size_t>(m), variant, config.evaluator);
          if (std::isnan(e_in)) e_in = input_error(model, *reference, config.n_samples);
          const GridEvaluation grid = evaluate_grid(model, *reference, thetas, alphas, config.threads);
          e_out = relative_sup_error(grid.approx, grid.reference);
          b_norm = grid.max_b_norm;
          cond = model.solver->inverted_condition();
        } catch (const Error& e) {
          if (!is_numerical_failure(e.code())) throw;
          status = to_string(e.code());
        }
        out << format_number(offset) << ',' << m << ',' << static_cast<int>(variant.strategy) << ','
            << (variant.strategy == Strategy::One ? format_number(variant.delta) : std::string("")) << ','
            << format_number(e_in) << ',' << format_number(e_out) << ',' << format_number(b_norm) << ','
            << format_number(cond) << ',' << status << '\n';
      }
    }
  }
}

void cmd_table(const ExperimentConfig& config, std::ostream& out) {
  check_grid_size(config);
  config.validate();
  std::vector<double> levels = config.table_epw;
  std::sort(levels.begin(), levels.end());
  write_metadata(out, "table", config);
  out << "k,shape,N,e_in,e_out,ratio,condition\n";
  for (const std::string& name : config.table_shapes) {
    for (const double k : config.table_k) {
      ExperimentConfig local = config;
      local.shape = name;
      local.geometry_file.clear();
      local.k = k;
      const Prepared prep = prepare(local);
      // One reference per (shape, k): the finest level refined again.
      MeshOptions finest = config.bem;
      finest.elements_per_wavelength = levels.back();
      const auto reference = assemble_and_factor(
          prep.shape, k, build_mesh(prep.shape, k, refined_options(finest, config.reference_refinements)),
          config.threads);
      for (const double epw : levels) {
        MeshOptions mesh = config.bem;
        mesh.elements_per_wavelength = epw;
        const EmbeddingModel model =
            build_model(prep.shape, k, mesh, prep.angles, prep.solver, config.evaluator, config.threads);
        const double e_in = input_error(model, *reference, config.n_samples);
        const GridEvaluation grid = evaluate_grid(model, *reference, equispaced_angles(config.n_theta),
                                                  equispaced_angles(config.n_alpha), config.threads);
        const double e_out = relative_sup_error(grid.approx, grid.reference);
        out << format_number(k) << ',' << name << ',' << model.system->size() << ',' << format_number(e_in) << ','
            << format_number(e_out) << ',' << format_number(e_out / e_in) << ','
            << format_number(model.solver->inverted_condition()) << '\n';
      }
    }
  }
}

}  // namespace embedff
