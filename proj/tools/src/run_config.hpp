#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "causalkm/simulation.hpp"

namespace causalkm::cli {

struct SimulationBlock {
  SimConfig study;      // delta, sigma, ns, reps, eval_draws, nuisance, estimators
  Eigen::Index n = 2000;  // sample size for fit/diagnose
};

struct DiagnoseOptions {
  Eigen::Index k_min = 1;
  Eigen::Index k_max = 10;
  std::vector<double> t_grid{0.1, 0.5, 1.0};
  std::optional<std::filesystem::path> centers;
  bool oracle_points = false;  // simulation only: scan true means instead of estimates
};

struct NuisanceOptions {
  std::optional<std::vector<int>> features;  // unset: all covariates (or the simulation default)
  int degree = 1;
  OutcomeFamily family = OutcomeFamily::ols;
  int neighbors = 0;
};

struct RunConfig {
  std::optional<std::filesystem::path> input;
  int arms = 0;  // 0: largest arm in the file
  std::optional<SimulationBlock> simulation;

  Eigen::Index k = 6;
  Estimator estimator = Estimator::semiparametric;
  SemiMethod method = SemiMethod::generalized_lloyd;
  int folds = 5;
  std::uint64_t seed = 20240601;
  int restarts = 10;
  double clip_epsilon = 0.01;
  Parametrization parametrization = Parametrization::levels;
  NuisanceOptions outcome;
  NuisanceOptions propensity;
  DiagnoseOptions diagnose;

  std::filesystem::path out = "out";
  bool plots = false;
  unsigned workers = 1;

  /// Checks the cross-field invariants (exactly one data source, k >= 1, K >= 2).
  void validate() const;

  OutcomeSpec outcome_spec(Eigen::Index d) const;
  PropensitySpec propensity_spec(Eigen::Index d) const;
  /// Study configuration with the top-level keys folded in.
  SimConfig study_config() const;
};

/// Parses a JSON document (may be empty) after applying `key.path=value`
/// overrides. Values are parsed as JSON and fall back to plain strings.
RunConfig parse_run_config(const std::string& json_text, const std::vector<std::string>& overrides);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace causalkm::cli
