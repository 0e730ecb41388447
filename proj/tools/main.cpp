// Command-line driver: far-field sweeps, full grids, oversampling studies and error tables.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>

#include "embedff/errors.hpp"
#include "embedff/experiments.hpp"
#include "embedff/specfun.hpp"

namespace {

using namespace embedff;

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

// Flag name -> config key. Flags are applied after the config file, so they win.
const std::map<std::string, std::string> kFlagKeys = {
    {"shape", "shape"},
    {"geometry-file", "geometry_file"},
    {"k", "k"},
    {"alpha", "sweep.alpha"},
    {"strategy", "embedding.strategy"},
    {"delta", "embedding.delta"},
    {"mtilde", "embedding.mtilde"},
    {"big-h", "embedding.big_h"},
    {"small-h", "embedding.small_h"},
    {"n-theta", "grid.n_theta"},
    {"n-alpha", "grid.n_alpha"},
    {"out", "output.path"},
    {"seed", "seed"},
    {"threads", "threads"},
};

struct Flags {
  std::string config_path;
  std::map<std::string, std::string> values;
  std::string spot_out;
};

void add_common(CLI::App* app, Flags& flags) {
  app->add_option("--config", flags.config_path, "plain-text key = value config file");
  for (const auto& [flag, key] : kFlagKeys) {
    app->add_option("--" + flag, flags.values[flag], "overrides " + key);
  }
}

ExperimentConfig make_config(const Flags& flags, const CLI::App* app) {
  ExperimentConfig config;
  if (!flags.config_path.empty()) config = load_config(flags.config_path);
  for (const auto& [flag, key] : kFlagKeys) {
    if (app->count("--" + flag) > 0) config.set(key, flags.values.at(flag));
  }
  config.validate();
  return config;
}

// Runs `body` with the configured output stream: stdout for "-", otherwise a file.
template <typename F>
void with_output(const std::string& path, F&& body) {
  if (path == "-") {
    body(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream file(path);
  if (!file) throw Error(ErrorCode::IOError, "cannot open output file '" + path + "'");
  body(file);
  if (!file) throw Error(ErrorCode::IOError, "failed writing '" + path + "'");
}

std::string spot_path_for(const std::string& out) {
  const auto dot = out.rfind('.');
  const auto slash = out.rfind('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return out + "_spot.csv";
  return out.substr(0, dot) + "_spot" + out.substr(dot);
}

int selftest(std::ostream& log) {
  int failures = 0;
  auto check = [&](bool ok, const std::string& name) {
    log << (ok ? "PASS " : "FAIL ") << name << '\n';
    if (!ok) ++failures;
  };

  const RationalShape square = shape_preset("square");
  check(square.p() == 2 && square.M() == 8, "square preset has p = 2, M = 8");
  const RationalShape screen = shape_preset("screen");
  check(screen.p() == 1 && screen.M() == 2, "screen preset has p = 1, M = 2");

  const double x = 5.0;
  const BesselPair b0 = bessel_jy(0, x);
  const BesselPair b1 = bessel_jy(1, x);
  const double wronskian = b1.j * b0.y - b0.j * b1.y;
  check(std::abs(wronskian - 2.0 / (kPi * x)) < 1e-12, "Bessel Wronskian at x = 5");

  const auto rule = gauss_legendre(20);
  const double integral = rule.integrate([](double t) { return std::pow(t, 38); }, -1.0, 1.0);
  check(std::abs(integral - 2.0 / 39.0) < 1e-14, "20-point Gauss rule integrates t^38 exactly");

  ExperimentConfig config;
  config.shape = "screen";
  config.k = 5.0;
  config.bem.elements_per_wavelength = 10.0;
  config.reference_refinements = 1;
  config.n_theta = 40;
  config.n_alpha = 40;
  config.n_samples = 200;
  const ErrorReport report = run_error_report(config);
  check(report.e_in < 1e-2 && report.e_out < 100.0 * report.e_in, "screen k = 5 embedding matches direct solves");
  return failures == 0 ? 0 : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-angle far-field maps of rational polygons via the stabilized embedding formula"};
  app.require_subcommand(1);

  Flags sweep_flags, grid_flags, study_flags, table_flags;
  auto* sweep = app.add_subcommand("sweep", "naive and stabilized errors along theta for one incident angle");
  add_common(sweep, sweep_flags);
  auto* grid = app.add_subcommand("grid", "log|D| on an n_theta x n_alpha grid plus spot-check errors");
  add_common(grid, grid_flags);
  grid->add_option("--spot-out", grid_flags.spot_out, "spot-check CSV path (default derived from --out)");
  auto* study = app.add_subcommand("study-oversampling", "error and coefficient norm versus mtilde and delta");
  add_common(study, study_flags);
  auto* table = app.add_subcommand("table", "input and output errors over k, shapes and mesh levels");
  add_common(table, table_flags);
  auto* self = app.add_subcommand("selftest", "quick internal consistency checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  const auto start = std::chrono::steady_clock::now();
  int status = 0;
  try {
    if (*self) {
      status = selftest(std::cout);
    } else if (*sweep) {
      const ExperimentConfig config = make_config(sweep_flags, sweep);
      with_output(config.out, [&](std::ostream& out) { cmd_sweep(config, out); });
    } else if (*grid) {
      const ExperimentConfig config = make_config(grid_flags, grid);
      std::string spot = grid_flags.spot_out;
      if (spot.empty() && config.out != "-") spot = spot_path_for(config.out);
      with_output(config.out, [&](std::ostream& out) {
        if (spot.empty()) {
          std::cerr << "note: spot-check errors skipped; pass --spot-out when writing to stdout\n";
          cmd_grid(config, out, nullptr);
        } else {
          with_output(spot, [&](std::ostream& spot_out) { cmd_grid(config, out, &spot_out); });
        }
      });
    } else if (*study) {
      const ExperimentConfig config = make_config(study_flags, study);
      with_output(config.out, [&](std::ostream& out) { cmd_oversampling_study(config, out); });
    } else if (*table) {
      const ExperimentConfig config = make_config(table_flags, table);
      with_output(config.out, [&](std::ostream& out) { cmd_table(config, out); });
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_numerical_failure(e.code()) ? kExitNumerical : kExitConfig;
  }

  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cerr << "wall time: " << seconds << " s\n";
  return status;
}
