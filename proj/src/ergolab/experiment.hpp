#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ergolab/inducing.hpp"
#include "ergolab/map_model.hpp"

namespace ergolab {

struct MapSpec {
  std::string builtin;            // doubling | ulam | cusp
  double gamma = 0.75;
  std::string file;               // map file, relative to the config directory
  std::string inline_text;        // name/branch/critical lines given in the section
  std::vector<std::string> order_overrides;  // "critical" lines replacing the declared set
};

struct AnalysisParams {
  double order_delta = 0.01;
  std::size_t order_samples = 200;
  double expansion_delta = 0.05;
  std::size_t expansion_horizon = 100;
  std::size_t expansion_orbits = 2000;
  std::size_t orbit_horizon = 60;
};

struct OperatorParams {
  std::size_t k = 4096;         // density grid
  std::size_t k_gap = 1024;     // spectral gap grid
  std::size_t k_scheme = 512;   // induced operator grid
  int n_eigs = 6;
  std::vector<double> theta{0.5, 1.0, 2.0, 3.0};
  std::size_t export_limit = 1u << 16;  // largest k whose matrix is written out
};

struct StatsParams {
  std::size_t N = 20000;
  std::size_t n = 10000;
  std::size_t burn_in = 1000;
  std::uint64_t seed = 1;
  std::string observable = "x";
  double ks_threshold = 0.05;
  std::size_t acf_lags = 30;
  std::string decay_observable = "indicator 0 0.25";
  std::size_t decay_N = 20000;
  std::size_t decay_window = 50000;
  std::size_t decay_n_max = 16;
  double ld_epsilon = 0.1;
  std::size_t ld_N = 100000;
  std::vector<std::size_t> ld_grid{100, 200, 300, 400, 500, 600, 700, 800, 900, 1000};
  double envelope_q = 2.0;
  double envelope_delta = 0.5;
  bool envelope = true;
};

struct ExperimentConfig {
  std::string source;
  std::string base_dir;   // directory of the config file
  MapSpec map;
  AnalysisParams analysis;
  InducingParams inducing;
  OperatorParams op;
  StatsParams stats;
  std::string out_dir = "ergolab_out";
  unsigned threads = 0;
  std::uint64_t hash() const;
};

/// Parses the config text; unknown keys and out-of-range values are errors
/// carrying `source:line`.
ExperimentConfig parse_config(std::string_view text, std::string_view source,
                              std::string_view base_dir = ".");
ExperimentConfig load_config(const std::string& path);

PiecewiseMap build_map(const ExperimentConfig& cfg);

/// Exit codes of the runner.
enum ExitCode : int { exit_ok = 0, exit_validation = 1, exit_check_failed = 2, exit_warning = 3 };

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct RunResult {
  int exit_code = exit_ok;
  std::vector<std::string> files;   // relative to the output directory
  std::vector<CheckResult> checks;
  std::vector<std::string> messages;
};

/// command: analyze-map | induce | spectrum | limits.
RunResult run_command(std::string_view command, const ExperimentConfig& cfg);

}  // namespace ergolab
