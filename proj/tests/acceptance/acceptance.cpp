// Acceptance checks for the estimators, diagnostics and simulation study.
// Prints one PASS/FAIL line per criterion and exits nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "causalkm/diagnostics.hpp"
#include "causalkm/eif.hpp"
#include "causalkm/report.hpp"
#include "causalkm/simulation.hpp"

using namespace causalkm;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

Matrix true_pi(const SimSample& s) {
  Matrix pi(s.data.n(), 2);
  pi.col(0) = Vector::Ones(s.data.n()) - s.pi1;
  pi.col(1) = s.pi1;
  return pi;
}

// 1. Closed-form oracle risk against an independent Monte Carlo of the jitter.
Outcome oracle_risk() {
  const double delta = 0.01;
  const double closed = oracle_population_risk(delta);
  std::mt19937_64 gen(12345);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  constexpr double pi = std::numbers::pi;
  const int m = 1000000;
  double sum = 0.0;
  for (int i = 0; i < m; ++i) {
    const double x3 = u(gen), x4 = u(gen), x5 = u(gen), x6 = u(gen);
    const double j0 = delta * (std::sin(pi * x3) + 0.5 * std::cos(pi * x4));
    const double j1 = delta * (std::cos(pi * x5) + 0.5 * std::sin(pi * x6));
    sum += j0 * j0 + j1 * j1;
  }
  const double mc = sum / m;
  const double rel = std::abs(mc - closed) / closed;
  return {closed == 1.25e-4 && rel < 0.01, fmt("closed=%.6g mc=%.6g rel_err=%.2e", closed, mc, rel)};
}

// 2. Noiseless data with exact nuisances: the cross-fitted risk is the
// k-means risk and generalized Lloyd retraces Lloyd.
Outcome reduction_identity() {
  SimConfig cfg;
  cfg.sigma = 0.0;
  cfg.delta = 0.5;
  auto rng = make_stream(2024, {2});
  const SimSample s = generate_sample(1500, rng, cfg);
  const CrossFitScores scores = scores_from_nuisances(s.data, s.mu, true_pi(s), 0.01);

  double worst = 0.0;
  auto crng = make_stream(2024, {3});
  for (int t = 0; t < 100; ++t) {
    Matrix c(6, 2);
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = uniform(crng, -7.0, 7.0);
    worst = std::max(worst, std::abs(risk_hat(scores, Codebook{c}) - empirical_risk(s.mu, Codebook{c})));
  }

  bool same_sequence = true;
  std::size_t compared = 0;
  double center_gap = 0.0;
  for (int t = 0; t < 10; ++t) {
    auto irng = make_stream(2024, {4, static_cast<std::uint64_t>(t)});
    const Codebook init = kmeanspp_init(s.mu, 6, irng);
    SemiOptions so;
    so.record_centers = true;
    const FitResult semi = minimize_semiparametric(scores, 6, init, SemiMethod::generalized_lloyd, so);
    const FitResult plain = lloyd(s.mu, init, LloydOptions{0.0, 300, true});
    // Lloyd stops once labels repeat; generalized Lloyd records the same
    // iterates up to that point.
    if (semi.center_trace.size() != plain.center_trace.size()) same_sequence = false;
    const std::size_t m = std::min(semi.center_trace.size(), plain.center_trace.size());
    for (std::size_t i = 0; i < m; ++i)
      center_gap = std::max(center_gap, (semi.center_trace[i] - plain.center_trace[i]).cwiseAbs().maxCoeff());
    compared += m;
    if (semi.assignments != plain.assignments) same_sequence = false;
  }
  same_sequence = same_sequence && center_gap <= 1e-12;
  return {worst <= 1e-12 && same_sequence,
          fmt("max|risk_hat-risk|=%.2e, iterate gap=%.2e over %g iterates", worst, center_gap,
              static_cast<double>(compared))};
}

// 3. Unbiasedness and double robustness of the first-moment scores.
Outcome unbiasedness() {
  SimConfig cfg;
  auto rng = make_stream(2024, {5});
  const Eigen::Index n = 100000;
  const SimSample s = generate_sample(n, rng, cfg);

  // E[mu_a(X)] = sum_S P(S) c_S. Sectors touching an axis cover a wedge of
  // area 1/2 + (1 - 1/sqrt3)/2 per quadrant side; the two vertical sectors
  // cover 2 * (1/2) * (1/sqrt3). Both weighted sums of the hexagon vanish.
  const double p_side = (0.5 + 0.5 * (1.0 - 1.0 / std::sqrt(3.0))) / 4.0;
  const double p_top = (1.0 / std::sqrt(3.0)) / 4.0;
  const Codebook h = hexagon_centers();
  Eigen::RowVector2d expected = Eigen::RowVector2d::Zero();
  for (int j = 0; j < 6; ++j) expected += (j == 1 || j == 4 ? p_top : p_side) * h.centers.row(j);

  Matrix mu_wrong(n, 2), pi_wrong = Matrix::Constant(n, 2, 0.5);
  for (Eigen::Index i = 0; i < n; ++i) mu_wrong.row(i) << 1.0 + 2.0 * s.data.x()(i, 0), -1.5 + s.data.x()(i, 1);

  struct Case {
    const char* label;
    const Matrix* mu;
    Matrix pi;
  };
  const Case cases[] = {{"true", &s.mu, true_pi(s)}, {"wrong-mu", &mu_wrong, true_pi(s)}, {"wrong-pi", &s.mu, pi_wrong}};
  bool ok = true;
  double worst_z = 0.0;
  for (const auto& c : cases) {
    const CrossFitScores scores = scores_from_nuisances(s.data, *c.mu, c.pi, 0.01);
    for (int a = 0; a < 2; ++a) {
      const Vector v = scores.phi1.col(a);
      const double mean = v.mean();
      const double se = std::sqrt((v.array() - mean).square().sum() / static_cast<double>(n - 1) / static_cast<double>(n));
      const double z = std::abs(mean - expected(a)) / se;
      worst_z = std::max(worst_z, z);
      ok = ok && z < 4.0;
    }
  }
  return {ok, fmt("worst |mean - E mu_a| / SE = %.2f over 3 nuisance cases x 2 arms (E mu = %.1e, %.1e)", worst_z,
                  expected(0), expected(1))};
}

// 4. Plug-in k-means against exhaustive enumeration.
Outcome brute_force_equivalence() {
  int matched = 0;
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    auto rng = make_stream(2024, {6, static_cast<std::uint64_t>(t)});
    const Eigen::Index n = 6 + t % 5;
    const Eigen::Index k = 2 + t % 2;
    Matrix x(n, 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = standard_normal(rng);
    const double oracle = empirical_risk(x, brute_force_codebook(x, k));
    PlugInOptions opts;
    opts.restarts = 20;
    const double fit = plug_in_estimate(x, k, static_cast<std::uint64_t>(t), opts).risk;
    const double gap = std::abs(fit - oracle);
    worst = std::max(worst, gap);
    if (gap <= 1e-9) ++matched;
  }
  return {matched == 50, fmt("%g/50 instances match, worst gap %.2e", matched, worst)};
}

// 5. Analytic gradient against central differences.
Outcome gradient_check() {
  SimConfig cfg;
  auto rng = make_stream(2024, {7});
  const SimSample s = generate_sample(2000, rng, cfg);
  const CrossFitScores scores =
      cross_fit(s.data, assign_folds(s.data.n(), 5, 11), cfg.outcome, cfg.propensity);
  const double h = 1e-5;
  int checked = 0, attempts = 0;
  double worst = 0.0;
  auto crng = make_stream(2024, {8});
  while (checked < 20 && attempts < 10000) {
    ++attempts;
    Matrix c(6, 2);
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = uniform(crng, -7.0, 7.0);
    const Codebook cb{c};
    if (boundary_distances(scores.mu_hat, cb).bisector.minCoeff() <= 1e-3) continue;
    const GradientBlock g = gradient(scores, cb);
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      Matrix cp = c, cm = c;
      cp.data()[i] += h;
      cm.data()[i] -= h;
      const double fd = (risk_hat(scores, Codebook{cp}) - risk_hat(scores, Codebook{cm})) / (2 * h);
      worst = std::max(worst, std::abs(fd - g.blocks.data()[i]));
    }
    ++checked;
  }
  return {checked == 20 && worst <= 1e-6,
          fmt("%g codebooks, max |fd - analytic| = %.2e", checked, worst)};
}

struct StudyRuns {
  StudyResult four_workers;
  std::string raw4, summary4;
};

StudyRuns& study_runs() {
  static StudyRuns runs = [] {
    StudyRuns r;
    r.four_workers = run_study(SimConfig{}, 4);
    std::ostringstream raw, sum;
    write_study_raw_csv(raw, r.four_workers);
    write_study_summary_csv(sum, r.four_workers);
    r.raw4 = raw.str();
    r.summary4 = sum.str();
    return r;
  }();
  return runs;
}

const SummaryRow* summary_row(const StudyResult& s, Eigen::Index n, Estimator e) {
  for (const auto& r : s.summary)
    if (r.n == n && r.estimator == e) return &r;
  return nullptr;
}

double slope_of(const StudyResult& s, Estimator e, bool excess) {
  for (const auto& sl : s.slopes)
    if (sl.estimator == e) return excess ? sl.excess_risk_slope : sl.per_center_l1_slope;
  return std::nan("");
}

// 6. Excess-risk ordering and slope comparison.
Outcome excess_risk_ordering() {
  const StudyResult& s = study_runs().four_workers;
  bool ok = true;
  std::string detail;
  for (Eigen::Index n : SimConfig{}.ns) {
    const auto* plug = summary_row(s, n, Estimator::plug_in);
    const auto* semi = summary_row(s, n, Estimator::semiparametric);
    ok = ok && plug && semi && semi->median_excess_risk < plug->median_excess_risk;
    if (plug && semi)
      detail += fmt("n=%g semi %.3g < plug %.3g; ", static_cast<double>(n), semi->median_excess_risk,
                    plug->median_excess_risk);
  }
  const double ss = slope_of(s, Estimator::semiparametric, true), sp = slope_of(s, Estimator::plug_in, true);
  ok = ok && ss < sp;
  return {ok, detail + fmt("slopes semi %.3f vs plug %.3f", ss, sp)};
}

// 7. Codebook-error ordering for n >= 1000.
Outcome codebook_error_ordering() {
  const StudyResult& s = study_runs().four_workers;
  bool ok = true;
  std::string detail;
  for (Eigen::Index n : SimConfig{}.ns) {
    if (n < 1000) continue;
    const auto* plug = summary_row(s, n, Estimator::plug_in);
    const auto* semi = summary_row(s, n, Estimator::semiparametric);
    ok = ok && plug && semi && semi->median_per_center_l1 < plug->median_per_center_l1;
    if (plug && semi)
      detail += fmt("n=%g semi %.3g < plug %.3g; ", static_cast<double>(n), semi->median_per_center_l1,
                    plug->median_per_center_l1);
  }
  return {ok, detail.substr(0, detail.size() - 2)};
}

std::string elbow_run(int& hits) {
  SimConfig cfg;
  std::ostringstream all;
  hits = 0;
  for (int seed = 0; seed < 20; ++seed) {
    auto rng = make_stream(2024, {9, static_cast<std::uint64_t>(seed)});
    const SimSample s = generate_sample(1200, rng, cfg);
    const ElbowTable table = elbow_scan(s.mu, 1, 10, 10, static_cast<std::uint64_t>(seed));
    if (last_substantial_gain(table, 0.05) == 6) ++hits;
    write_elbow_csv(all, table);
  }
  return all.str();
}

std::string& elbow_csv() {
  static std::string csv;
  return csv;
}

// 8. Elbow selects six clusters.
Outcome elbow_reproduction() {
  int hits = 0;
  elbow_csv() = elbow_run(hits);
  return {hits >= 18, fmt("last gain above 5%% of wcss(1) at k=6 in %g/20 seeds", hits)};
}

// 9. Hard margin of the simulated oracle means.
Outcome margin_certificate() {
  SimConfig cfg;
  const Codebook h = hexagon_centers();
  int zero = 0;
  double min_dist = INFINITY;
  for (int t = 0; t < 50; ++t) {
    auto rng = make_stream(2024, {10, static_cast<std::uint64_t>(t)});
    const SimSample s = generate_sample(2000, rng, cfg);
    const BoundaryMass m = boundary_mass(s.mu, h, 1.0);
    if (m.bisector == 0.0 && m.gap == 0.0) ++zero;
    min_dist = std::min(min_dist, boundary_distances(s.mu, h).bisector.minCoeff());
  }
  return {zero == 50, fmt("boundary mass 0 in %g/50 samples, min boundary distance %.4f", zero, min_dist)};
}

// 10. Byte-identical reruns across worker counts.
Outcome determinism() {
  const StudyResult rerun = run_study(SimConfig{}, 1);
  std::ostringstream raw, sum;
  write_study_raw_csv(raw, rerun);
  write_study_summary_csv(sum, rerun);
  const bool study_same = raw.str() == study_runs().raw4 && sum.str() == study_runs().summary4;
  int hits = 0;
  const bool elbow_same = !elbow_csv().empty() && elbow_run(hits) == elbow_csv();
  std::string detail = std::string("study raw/summary CSVs with 4 vs 1 workers ") +
                       (study_same ? "identical" : "DIFFER") + ", elbow CSVs on rerun " +
                       (elbow_same ? "identical" : "DIFFER");
  return {study_same && elbow_same, detail};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "oracle risk", 5, oracle_risk},
      {2, "reduction identity", 10, reduction_identity},
      {3, "influence-function unbiasedness", 30, unbiasedness},
      {4, "brute-force k-means equivalence", 30, brute_force_equivalence},
      {5, "gradient check", 10, gradient_check},
      {6, "excess-risk ordering", 900, excess_risk_ordering},
      {7, "codebook-error ordering", 900, codebook_error_ordering},
      {8, "elbow selects k=6", 300, elbow_reproduction},
      {9, "margin certificate", 5, margin_certificate},
      {10, "determinism", 1200, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.budget_seconds;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("%s  %2d %-34s %7.2fs  %s%s\n", pass ? "PASS" : "FAIL", c.id, c.name, secs, o.detail.c_str(),
                in_time ? "" : " [over time budget]");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
