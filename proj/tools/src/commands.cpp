#include "commands.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <ostream>

#include "CLI11.hpp"
#include "causalkm/errors.hpp"
#include "causalkm/report.hpp"
#include "svg_chart.hpp"

namespace causalkm::cli {

namespace {

constexpr std::uint64_t kSampleStream = 0x73616d70;

void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  body(out);
  if (!out) throw ConfigError("failed writing " + path.string());
}

// Data set, optional simulated truth, and the cross-fitted scores used by
// both fit and diagnose.
struct Prepared {
  Dataset data;
  std::optional<SimSample> sample;
  CrossFitScores scores;
};

Prepared prepare(const RunConfig& cfg) {
  std::optional<SimSample> sample;
  std::optional<Dataset> data;
  OutcomeSpec outcome;
  PropensitySpec propensity;
  if (cfg.simulation) {
    const SimConfig study = cfg.study_config();
    auto rng = make_stream(cfg.seed, {kSampleStream, static_cast<std::uint64_t>(cfg.simulation->n)});
    sample = generate_sample(cfg.simulation->n, rng, study);
    data = sample->data;
    outcome = study.outcome;
    propensity = study.propensity;
  } else {
    data = load_dataset(*cfg.input, cfg.arms);
    outcome = cfg.outcome_spec(data->d());
    propensity = cfg.propensity_spec(data->d());
  }

  CrossFitScores scores;
  if (sample && cfg.simulation->study.nuisance == NuisanceSource::oracle) {
    Matrix pi(data->n(), 2);
    pi.col(0) = Vector::Ones(data->n()) - sample->pi1;
    pi.col(1) = sample->pi1;
    scores = scores_from_nuisances(*data, sample->mu, pi, cfg.clip_epsilon);
  } else {
    scores = cross_fit(*data, assign_folds(data->n(), cfg.folds, cfg.seed), outcome, propensity);
  }
  if (cfg.parametrization != Parametrization::levels) scores = reparametrize(scores, cfg.parametrization);
  return Prepared{std::move(*data), std::move(sample), std::move(scores)};
}

void write_dataset_csv(std::ostream& out, const Dataset& d) {
  out << "y,a";
  for (Eigen::Index c = 0; c < d.d(); ++c) out << ",x" << c + 1;
  out << '\n';
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    out << format_double(d.y()(i)) << ',' << d.arms()(i);
    for (Eigen::Index c = 0; c < d.d(); ++c) out << ',' << format_double(d.x()(i, c));
    out << '\n';
  }
}

double sample_variance(const Vector& v) {
  if (v.size() < 2) return std::nan("");
  return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
}

void ensure_out_dir(const RunConfig& cfg) { std::filesystem::create_directories(cfg.out); }

LogLogChart study_chart(const StudyResult& study, bool excess) {
  LogLogChart chart;
  chart.title = excess ? "Excess risk" : "Codebook error";
  chart.x_label = "sample size n";
  chart.y_label = excess ? "median excess risk" : "median per-center L1 error";
  for (const auto& sl : study.slopes) {
    Series s;
    s.name = to_string(sl.estimator);
    for (const auto& row : study.summary) {
      if (row.estimator != sl.estimator) continue;
      s.x.push_back(static_cast<double>(row.n));
      s.y.push_back(excess ? row.median_excess_risk : row.median_per_center_l1);
    }
    chart.series.push_back(std::move(s));
  }
  return chart;
}

}  // namespace

int cmd_fit(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const Prepared prep = prepare(cfg);
  PlugInOptions plug_opts;
  plug_opts.restarts = cfg.restarts;
  FitResult fit = plug_in_estimate(prep.scores.mu_hat, cfg.k, cfg.seed, plug_opts);
  if (cfg.estimator == Estimator::semiparametric)
    fit = minimize_semiparametric(prep.scores, cfg.k, fit.codebook, cfg.method);

  const SemiObjective objective(prep.scores, cfg.k);
  const Vector unit = objective.unit_scores(fit.codebook);
  const double variance = sample_variance(unit);
  const double moment = objective.gradient(fit.codebook).max_abs();

  ensure_out_dir(cfg);
  write_file(cfg.out / "centers.csv", [&](std::ostream& o) { write_centers_csv(o, fit.codebook); });
  write_file(cfg.out / "assignments.csv", [&](std::ostream& o) { write_assignments_csv(o, fit.assignments); });
  write_file(cfg.out / "risk_trace.csv", [&](std::ostream& o) { write_risk_trace_csv(o, fit); });
  write_file(cfg.out / "fit_report.csv", [&](std::ostream& o) {
    o << "estimator,method,parametrization,n,p,k,folds,empirical_risk,risk_hat,risk_hat_se,"
         "phi_variance,moment_residual,iterations,converged,degenerate\n";
    o << to_string(cfg.estimator) << ','
      << (cfg.estimator == Estimator::semiparametric ? to_string(cfg.method) : "lloyd") << ','
      << to_string(cfg.parametrization) << ',' << prep.data.n() << ',' << prep.data.p() << ',' << cfg.k << ','
      << prep.scores.K << ',' << format_double(empirical_risk(prep.scores.mu_hat, fit.codebook)) << ','
      << format_double(unit.mean()) << ','
      << format_double(std::sqrt(variance / static_cast<double>(unit.size()))) << ','
      << format_double(variance) << ',' << format_double(moment) << ',' << fit.iterations << ','
      << (fit.converged ? 1 : 0) << ',' << (fit.degenerate ? 1 : 0) << '\n';
  });
  if (prep.sample)
    write_file(cfg.out / "sample.csv", [&](std::ostream& o) { write_dataset_csv(o, prep.data); });
  if (cfg.estimator == Estimator::semiparametric && !fit.converged)
    log << "warning: moment condition not met (sup-norm " << format_double(moment) << ")\n";
  log << "fit: " << to_string(cfg.estimator) << " k=" << cfg.k << " n=" << prep.data.n()
      << " risk_hat=" << format_double(unit.mean()) << " -> " << cfg.out.string() << '\n';
  return kOk;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  if (!cfg.simulation) throw ConfigError("simulate needs a 'simulation' block");
  const StudyResult study = run_study(cfg.study_config(), cfg.workers);
  ensure_out_dir(cfg);
  write_file(cfg.out / "study_raw.csv", [&](std::ostream& o) { write_study_raw_csv(o, study); });
  write_file(cfg.out / "study_summary.csv", [&](std::ostream& o) { write_study_summary_csv(o, study); });
  if (cfg.plots) {
    write_file(cfg.out / "excess_risk.svg", [&](std::ostream& o) { o << render_loglog_svg(study_chart(study, true)); });
    write_file(cfg.out / "codebook_error.svg",
               [&](std::ostream& o) { o << render_loglog_svg(study_chart(study, false)); });
  }
  int failed = 0;
  for (const auto& s : study.summary) failed += s.failed;
  if (failed > 0) log << "warning: " << failed << " replication(s) failed\n";
  log << "simulate: " << study.rows.size() << " replications -> " << cfg.out.string() << '\n';
  return kOk;
}

int cmd_diagnose(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  if (cfg.input && !cfg.diagnose.centers) throw ConfigError("diagnose on input data needs diagnose.centers");
  if (cfg.diagnose.oracle_points && !cfg.simulation)
    throw ConfigError("diagnose.points = oracle needs a simulation block");
  const Prepared prep = prepare(cfg);

  Matrix points = prep.scores.mu_hat;
  if (cfg.diagnose.oracle_points) {
    points = reparametrize(CounterfactualMatrix{prep.sample->mu, Parametrization::levels}, cfg.parametrization)
                 .values;
  }

  Codebook centers;
  if (cfg.diagnose.centers) {
    const auto& path = *cfg.diagnose.centers;
    std::ifstream in(path);
    if (!in) throw DataError("cannot open centers file " + path.string());
    centers = read_centers_csv(in);
  } else {
    centers = Codebook{reparametrize(CounterfactualMatrix{hexagon_centers().centers, Parametrization::levels},
                                     cfg.parametrization)
                           .values};
  }
  if (centers.dim() != points.cols())
    throw DataError("centers have " + std::to_string(centers.dim()) + " coordinates, data has " +
                    std::to_string(points.cols()) + " arms");

  const ElbowTable elbow = elbow_scan(points, cfg.diagnose.k_min, cfg.diagnose.k_max, cfg.restarts, cfg.seed);
  const IntVector labels = assign(points, centers);
  const ClusterProfile profile =
      cluster_profiles(prep.data, CounterfactualMatrix{points, cfg.parametrization}, labels, centers.k());
  const Matrix levels = reparametrize(CounterfactualMatrix{points, cfg.parametrization}, Parametrization::levels).values;

  ensure_out_dir(cfg);
  write_file(cfg.out / "elbow.csv", [&](std::ostream& o) { write_elbow_csv(o, elbow); });
  write_file(cfg.out / "boundary_mass.csv", [&](std::ostream& o) {
    o << "t,bisector_mass,gap_mass\n";
    for (double t : cfg.diagnose.t_grid) {
      const BoundaryMass m = boundary_mass(points, centers, t);
      o << format_double(t) << ',' << format_double(m.bisector) << ',' << format_double(m.gap) << '\n';
    }
  });
  write_file(cfg.out / "profile_covariates.csv", [&](std::ostream& o) { write_profile_covariates_csv(o, profile); });
  write_file(cfg.out / "profile_cates.csv", [&](std::ostream& o) { write_profile_cates_csv(o, profile); });
  write_file(cfg.out / "cate_values.csv", [&](std::ostream& o) {
    o << "unit,cluster";
    for (const auto& [a, b] : profile.pairs) o << ",tau" << a << b;
    o << '\n';
    for (Eigen::Index i = 0; i < levels.rows(); ++i) {
      o << i + 1 << ',' << labels(i) + 1;
      for (const auto& [a, b] : profile.pairs) o << ',' << format_double(levels(i, a - 1) - levels(i, b - 1));
      o << '\n';
    }
  });
  log << "diagnose: elbow k=" << cfg.diagnose.k_min << ".." << cfg.diagnose.k_max
      << ", last gain above 5% at k=" << last_substantial_gain(elbow, 0.05) << " -> " << cfg.out.string()
      << '\n';
  return kOk;
}

int run_cli(int argc, const char* const* argv, std::ostream& log, std::ostream& err) {
  CLI::App app{"Counterfactual-mean clustering: plug-in and semiparametric k-means"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  int workers = 0;
  bool plots = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON configuration file");
    sub->add_option("--set", overrides, "override a configuration key (dotted.key=value); repeatable")
        ->allow_extra_args(false);
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--workers", workers, "worker threads for the simulation study")->check(CLI::PositiveNumber);
    sub->add_flag("--plots", plots, "write SVG charts");
  };
  CLI::App* fit = app.add_subcommand("fit", "estimate a codebook and write centers and assignments");
  CLI::App* simulate = app.add_subcommand("simulate", "run the hexagon simulation study");
  CLI::App* diagnose = app.add_subcommand("diagnose", "elbow, boundary-mass and cluster-profile diagnostics");
  for (auto* sub : {fit, simulate, diagnose}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, log, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    std::string text;
    if (!config_path.empty()) text = read_text_file(config_path);
    RunConfig cfg = parse_run_config(text, overrides);
    if (!out_dir.empty()) cfg.out = out_dir;
    if (workers > 0) cfg.workers = static_cast<unsigned>(workers);
    if (plots) cfg.plots = true;

    if (fit->parsed()) return cmd_fit(cfg, log);
    if (simulate->parsed()) return cmd_simulate(cfg, log);
    return cmd_diagnose(cfg, log);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const Error& e) {
    err << "fit error: " << e.what() << '\n';
    return kFitError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFitError;
  }
}

}  // namespace causalkm::cli
