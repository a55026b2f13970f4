#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "causalkm/eif.hpp"
#include "causalkm/kmeans.hpp"
#include "causalkm/nuisance.hpp"

namespace causalkm {

enum class Estimator { plug_in, semiparametric };

const char* to_string(Estimator e);
Estimator parse_estimator(std::string_view name);

enum class NuisanceSource {
  estimated,  // cross-fitted working models
  oracle,     // true mu and pi of the generating process
};

/// Six-cluster hexagon design: covariates X1..X6 ~ Unif[-1, 1], sector from
/// the polar angle of (X1, X2), counterfactual means at the sector's hexagon
/// vertex plus small smooth jitters, logistic treatment assignment.
struct SimConfig {
  double delta = 0.01;
  double sigma = 0.15;
  std::vector<Eigen::Index> ns{500, 1000, 2000, 4000};
  int reps = 20;
  std::uint64_t seed = 20240601;
  int folds = 5;
  std::vector<Estimator> estimators{Estimator::plug_in, Estimator::semiparametric};
  OutcomeSpec outcome{FeatureSpec{{1, 2}, 1}};
  PropensitySpec propensity{FeatureSpec{{1, 2, 3}, 1}, 0.01};
  NuisanceSource nuisance = NuisanceSource::estimated;
  Eigen::Index k = 6;
  int restarts = 10;
  SemiMethod method = SemiMethod::generalized_lloyd;
  Eigen::Index eval_draws = 200000;

  void validate() const;
};

/// Vertices of the regular hexagon with circumradius 6 and a vertex at (6, 0),
/// counter-clockwise. Center S belongs to sector S.
Codebook hexagon_centers();

/// Sector 1..6 for a polar angle: left-open, right-closed intervals between
/// -pi, -2pi/3, -pi/3, 0, pi/3, 2pi/3, pi, with -pi folded into sector 1.
int sector_of(double theta);

double expit(double x);

/// True treated-arm probability, clamped to [0.05, 0.95].
double treatment_probability(const Eigen::Ref<const Eigen::RowVectorXd>& x);

struct SimSample {
  Dataset data;       // arm 1 = control, arm 2 = treated
  Matrix mu;          // n x 2 true (mu_0, mu_1)
  Vector pi1;         // true treated probability
  IntVector sector;   // 1..6
};

SimSample generate_sample(Eigen::Index n, Rng& rng, const SimConfig& cfg);

/// Closed form R(C*) = (5/4) delta^2.
double oracle_population_risk(double delta);

struct RiskEstimate {
  double risk = 0.0;
  double se = 0.0;
};

/// Monte Carlo population risk of `codebook` over m fresh draws of mu(X).
RiskEstimate evaluate_population_risk(const Codebook& codebook, const SimConfig& cfg,
                                      Eigen::Index m, Rng& rng);

struct ReplicationResult {
  double excess_risk = 0.0;
  double per_center_l1 = 0.0;
  double moment_residual = 0.0;
  bool failed = false;
  std::string error;
};

/// One simulated data set of size n analysed with one estimator. Data and
/// evaluation streams depend on (seed, n) only, so different estimators see
/// the same sample.
ReplicationResult run_replication(Eigen::Index n, std::uint64_t seed, Estimator estimator,
                                  const SimConfig& cfg);

/// Seed of replication `rep` under master seed `seed`.
std::uint64_t replication_seed(std::uint64_t seed, int rep);

struct StudyRow {
  Eigen::Index n = 0;
  Estimator estimator = Estimator::plug_in;
  int rep = 0;
  ReplicationResult result;
};

struct SummaryRow {
  Eigen::Index n = 0;
  Estimator estimator = Estimator::plug_in;
  double median_excess_risk = 0.0;
  double median_per_center_l1 = 0.0;
  int failed = 0;
};

struct SlopeRow {
  Estimator estimator = Estimator::plug_in;
  double excess_risk_slope = 0.0;
  double per_center_l1_slope = 0.0;
};

struct StudyResult {
  std::vector<StudyRow> rows;        // ordered by (n, estimator, rep)
  std::vector<SummaryRow> summary;   // ordered by (n, estimator)
  std::vector<SlopeRow> slopes;      // one per estimator
};

/// Least-squares slope of log(value) on log(n); NaN with fewer than two
/// positive values.
double loglog_slope(const std::vector<double>& ns, const std::vector<double>& values);

double median(std::vector<double> values);

/// Runs every (n, estimator, rep) cell on `workers` threads. Results do not
/// depend on the worker count.
StudyResult run_study(const SimConfig& cfg, unsigned workers = 1);

}  // namespace causalkm
