#include "causalkm/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <thread>

#include "causalkm/diagnostics.hpp"
#include "causalkm/errors.hpp"

namespace causalkm {

namespace {

constexpr std::uint64_t kDataStream = 1;
constexpr std::uint64_t kFoldStream = 2;
constexpr std::uint64_t kFitStream = 3;
constexpr std::uint64_t kEvalStream = 4;
constexpr int kCovariates = 6;

// Draws X1..X6 and returns the true (mu_0, mu_1) and sector.
void draw_unit(Rng& rng, double delta, const Codebook& hex, Eigen::RowVectorXd& x, double& mu0,
               double& mu1, int& sector) {
  for (int c = 0; c < kCovariates; ++c) x(c) = uniform(rng, -1.0, 1.0);
  constexpr double pi = std::numbers::pi;
  sector = sector_of(std::atan2(x(1), x(0)));
  const double j0 = delta * (std::sin(pi * x(2)) + 0.5 * std::cos(pi * x(3)));
  const double j1 = delta * (std::cos(pi * x(4)) + 0.5 * std::sin(pi * x(5)));
  mu0 = hex.centers(sector - 1, 0) + j0;
  mu1 = hex.centers(sector - 1, 1) + j1;
}

}  // namespace

const char* to_string(Estimator e) {
  return e == Estimator::plug_in ? "plug_in" : "semiparametric";
}

Estimator parse_estimator(std::string_view name) {
  if (name == "plug_in" || name == "plugin") return Estimator::plug_in;
  if (name == "semiparametric" || name == "semi") return Estimator::semiparametric;
  throw ConfigError("unknown estimator '" + std::string(name) + "'");
}

void SimConfig::validate() const {
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw ConfigError("delta must be nonnegative");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be nonnegative");
  if (reps < 1) throw ConfigError("reps must be at least 1");
  if (ns.empty()) throw ConfigError("ns must not be empty");
  for (auto n : ns)
    if (n < 2 * folds || n < k) throw ConfigError("sample size " + std::to_string(n) + " too small");
  if (folds < 2) throw ConfigError("folds must be at least 2");
  if (k < 1) throw ConfigError("k must be at least 1");
  if (restarts < 1) throw ConfigError("restarts must be at least 1");
  if (estimators.empty()) throw ConfigError("no estimators selected");
  if (eval_draws < 1) throw ConfigError("eval_draws must be positive");
  if (!(propensity.clip_epsilon > 0.0 && propensity.clip_epsilon < 0.5))
    throw ConfigError("propensity clip epsilon must lie in (0, 0.5)");
}

Codebook hexagon_centers() {
  Codebook cb;
  cb.centers.resize(6, 2);
  const double h = 3.0 * std::numbers::sqrt3;
  cb.centers << 6.0, 0.0,  //
      3.0, h,              //
      -3.0, h,             //
      -6.0, 0.0,           //
      -3.0, -h,            //
      3.0, -h;
  return cb;
}

int sector_of(double theta) {
  constexpr double pi = std::numbers::pi;
  if (theta <= -2.0 * pi / 3.0) return 1;
  if (theta <= -pi / 3.0) return 2;
  if (theta <= 0.0) return 3;
  if (theta <= pi / 3.0) return 4;
  if (theta <= 2.0 * pi / 3.0) return 5;
  return 6;
}

double expit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double treatment_probability(const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  const double p = expit(-0.2 + 0.6 * x(0) - 0.25 * x(1) + 0.2 * x(2));
  return std::clamp(p, 0.05, 0.95);
}

SimSample generate_sample(Eigen::Index n, Rng& rng, const SimConfig& cfg) {
  if (n < 1) throw ConfigError("sample size must be at least 1");
  const Codebook hex = hexagon_centers();
  Vector y(n);
  IntVector arms(n);
  Matrix x(n, kCovariates);
  Matrix mu(n, 2);
  Vector pi1(n);
  IntVector sector(n);
  Eigen::RowVectorXd row(kCovariates);
  for (Eigen::Index i = 0; i < n; ++i) {
    double mu0 = 0.0, mu1 = 0.0;
    int s = 0;
    draw_unit(rng, cfg.delta, hex, row, mu0, mu1, s);
    x.row(i) = row;
    mu(i, 0) = mu0;
    mu(i, 1) = mu1;
    sector(i) = s;
    pi1(i) = treatment_probability(row);
    const bool treated = uniform01(rng) < pi1(i);
    arms(i) = treated ? 2 : 1;
    const double noise = standard_normal(rng);
    y(i) = (treated ? mu1 : mu0) + cfg.sigma * noise;
  }
  return SimSample{Dataset(std::move(y), std::move(arms), std::move(x), 2, ArmCoverage::optional),
                   std::move(mu), std::move(pi1), std::move(sector)};
}

double oracle_population_risk(double delta) { return 1.25 * delta * delta; }

RiskEstimate evaluate_population_risk(const Codebook& codebook, const SimConfig& cfg,
                                      Eigen::Index m, Rng& rng) {
  if (m < 2) throw ConfigError("population risk needs at least two draws");
  if (codebook.dim() != 2) throw ShapeError("codebook must live in the two-arm mean space");
  const Codebook hex = hexagon_centers();
  Eigen::RowVectorXd row(kCovariates);
  Matrix point(1, 2);
  double sum = 0.0, sum_sq = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    int s = 0;
    draw_unit(rng, cfg.delta, hex, row, point(0, 0), point(0, 1), s);
    const Eigen::Index j = nearest_center(point, 0, codebook.centers);
    const double loss = (point.row(0) - codebook.centers.row(j)).squaredNorm();
    sum += loss;
    sum_sq += loss * loss;
  }
  const double md = static_cast<double>(m);
  RiskEstimate est;
  est.risk = sum / md;
  const double var = std::max(0.0, (sum_sq - md * est.risk * est.risk) / (md - 1.0));
  est.se = std::sqrt(var / md);
  return est;
}

std::uint64_t replication_seed(std::uint64_t seed, int rep) {
  auto rng = make_stream(seed, {0x72657073ULL, static_cast<std::uint64_t>(rep)});
  return rng();
}

ReplicationResult run_replication(Eigen::Index n, std::uint64_t seed, Estimator estimator,
                                  const SimConfig& cfg) {
  ReplicationResult out;
  try {
    const auto un = static_cast<std::uint64_t>(n);
    auto data_rng = make_stream(seed, {un, kDataStream});
    const SimSample sample = generate_sample(n, data_rng, cfg);

    CrossFitScores scores;
    if (cfg.nuisance == NuisanceSource::oracle) {
      Matrix pi(n, 2);
      pi.col(0) = Vector::Ones(n) - sample.pi1;
      pi.col(1) = sample.pi1;
      scores = scores_from_nuisances(sample.data, sample.mu, pi, cfg.propensity.clip_epsilon);
    } else {
      const auto folds =
          assign_folds(n, cfg.folds, make_stream(seed, {un, kFoldStream})());
      scores = cross_fit(sample.data, folds, cfg.outcome, cfg.propensity);
    }

    PlugInOptions plug_opts;
    plug_opts.restarts = cfg.restarts;
    const std::uint64_t fit_seed = make_stream(seed, {un, kFitStream})();
    FitResult fit = plug_in_estimate(scores.mu_hat, cfg.k, fit_seed, plug_opts);
    if (estimator == Estimator::semiparametric) {
      fit = minimize_semiparametric(scores, cfg.k, fit.codebook, cfg.method);
      out.moment_residual = fit.moment_residual;
    } else {
      out.moment_residual = gradient(scores, fit.codebook).max_abs();
    }

    auto eval_rng = make_stream(seed, {un, kEvalStream});
    const RiskEstimate risk = evaluate_population_risk(fit.codebook, cfg, cfg.eval_draws, eval_rng);
    out.excess_risk = risk.risk - oracle_population_risk(cfg.delta);
    if (fit.codebook.k() == 6) {
      out.per_center_l1 = codebook_error(fit.codebook, hexagon_centers()).per_center;
    } else {
      out.per_center_l1 = std::numeric_limits<double>::quiet_NaN();
    }
  } catch (const Error& e) {
    out.failed = true;
    out.error = e.what();
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

double loglog_slope(const std::vector<double>& ns, const std::vector<double>& values) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < ns.size() && i < values.size(); ++i) {
    if (ns[i] > 0.0 && values[i] > 0.0 && std::isfinite(values[i])) {
      lx.push_back(std::log(ns[i]));
      ly.push_back(std::log(values[i]));
    }
  }
  if (lx.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = static_cast<double>(lx.size());
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / m;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / m;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
}

StudyResult run_study(const SimConfig& cfg, unsigned workers) {
  cfg.validate();
  StudyResult study;
  for (auto n : cfg.ns)
    for (auto est : cfg.estimators)
      for (int rep = 0; rep < cfg.reps; ++rep) study.rows.push_back(StudyRow{n, est, rep, {}});

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < study.rows.size(); i = next++) {
      auto& row = study.rows[i];
      row.result = run_replication(row.n, replication_seed(cfg.seed, row.rep), row.estimator, cfg);
    }
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(study.rows.size())));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (auto n : cfg.ns) {
    for (auto est : cfg.estimators) {
      SummaryRow s{n, est, 0.0, 0.0, 0};
      std::vector<double> excess, l1;
      for (const auto& row : study.rows) {
        if (row.n != n || row.estimator != est) continue;
        if (row.result.failed) {
          ++s.failed;
          continue;
        }
        excess.push_back(row.result.excess_risk);
        l1.push_back(row.result.per_center_l1);
      }
      s.median_excess_risk = median(excess);
      s.median_per_center_l1 = median(l1);
      study.summary.push_back(s);
    }
  }
  for (auto est : cfg.estimators) {
    std::vector<double> ns, excess, l1;
    for (const auto& s : study.summary) {
      if (s.estimator != est) continue;
      ns.push_back(static_cast<double>(s.n));
      excess.push_back(s.median_excess_risk);
      l1.push_back(s.median_per_center_l1);
    }
    study.slopes.push_back(SlopeRow{est, loglog_slope(ns, excess), loglog_slope(ns, l1)});
  }
  return study;
}

}  // namespace causalkm
