#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "causalkm/errors.hpp"
#include "commands.hpp"
#include "svg_chart.hpp"

namespace causalkm::cli {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ckm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(std::vector<std::string> args) {
    args.insert(args.begin(), "ckm");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    log_.str("");
    err_.str("");
    return run_cli(static_cast<int>(argv.size()), argv.data(), log_, err_);
  }

  fs::path dir_;
  std::ostringstream log_, err_;
};

void expect_csv(const fs::path& p, const std::string& header) {
  ASSERT_TRUE(fs::exists(p)) << p;
  const std::string s = slurp(p);
  EXPECT_EQ(s.substr(0, s.find('\n')), header) << p;
  EXPECT_EQ(s.back(), '\n') << p;
}

TEST_F(CliTest, HelpAndUsageErrors) {
  EXPECT_EQ(run({"--help"}), 0);
  EXPECT_EQ(run({}), kConfigError);
  EXPECT_EQ(run({"cluster"}), kConfigError);
  EXPECT_EQ(run({"fit", "--bogus"}), kConfigError);
}

TEST_F(CliTest, FitOnSimulatedDataThenOnItsCsv) {
  const auto out = dir_ / "sim";
  ASSERT_EQ(run({"fit", "--set", "simulation.n=600", "--set", "estimator=semiparametric", "--out", out.string()}),
            0)
      << err_.str();
  expect_csv(out / "centers.csv", "cluster,mu1,mu2");
  expect_csv(out / "assignments.csv", "unit,cluster");
  expect_csv(out / "risk_trace.csv", "iteration,risk");
  expect_csv(out / "fit_report.csv",
             "estimator,method,parametrization,n,p,k,folds,empirical_risk,risk_hat,risk_hat_se,phi_variance,"
             "moment_residual,iterations,converged,degenerate");
  expect_csv(out / "sample.csv", "y,a,x1,x2,x3,x4,x5,x6");
  EXPECT_EQ(line_count(slurp(out / "centers.csv")), 7u);
  EXPECT_EQ(line_count(slurp(out / "assignments.csv")), 601u);

  const auto out2 = dir_ / "csv";
  const auto cfg = dir_ / "fit.json";
  spit(cfg, R"({"input": ")" + (out / "sample.csv").string() +
                R"(", "k": 6, "outcome": {"features": [1, 2]}, "propensity": {"features": [1, 2, 3]}})");
  ASSERT_EQ(run({"fit", "--config", cfg.string(), "--out", out2.string()}), 0) << err_.str();
  EXPECT_EQ(line_count(slurp(out2 / "centers.csv")), 7u);
  EXPECT_FALSE(fs::exists(out2 / "sample.csv"));
}

TEST_F(CliTest, FitPlugInWithContrastsAndKnn) {
  const auto out = dir_ / "o";
  ASSERT_EQ(run({"fit", "--set", "simulation.n=300", "--set", "estimator=plug_in", "--set",
                 "parametrization=contrasts_vs_baseline", "--set", "outcome.model=knn", "--set", "k=3",
                 "--out", out.string()}),
            0)
      << err_.str();
  EXPECT_EQ(line_count(slurp(out / "centers.csv")), 4u);
  EXPECT_NE(slurp(out / "fit_report.csv").find("plug_in,lloyd,contrasts,"), std::string::npos);
}

TEST_F(CliTest, BothDataSourcesIsConfigError) {
  EXPECT_EQ(run({"fit", "--set", "input=x.csv", "--set", "simulation.n=100", "--out", dir_.string()}),
            kConfigError);
  EXPECT_EQ(run({"fit", "--out", dir_.string()}), kConfigError);
}

TEST_F(CliTest, NonNumericOutcomeIsDataError) {
  const auto data = dir_ / "bad.csv";
  spit(data, "y,a,x1\n1.0,1,0.5\nabc,2,0.1\n");
  EXPECT_EQ(run({"fit", "--set", "input=" + data.string(), "--out", dir_.string()}), kDataError);
  EXPECT_NE(err_.str().find("row 2, column y"), std::string::npos) << err_.str();
  EXPECT_EQ(run({"fit", "--set", "input=" + (dir_ / "missing.csv").string(), "--out", dir_.string()}),
            kDataError);
}

TEST_F(CliTest, MalformedConfigIsConfigError) {
  const auto cfg = dir_ / "c.json";
  spit(cfg, "{not json");
  EXPECT_EQ(run({"fit", "--config", cfg.string()}), kConfigError);
  EXPECT_EQ(run({"fit", "--config", (dir_ / "none.json").string()}), kConfigError);
  EXPECT_EQ(run({"fit", "--set", "kk=3"}), kConfigError);
  EXPECT_EQ(run({"fit", "--set", "k"}), kConfigError);
  EXPECT_EQ(run({"fit", "--set", "simulation.n=300", "--set", "k=\"six\""}), kConfigError);
  EXPECT_EQ(run({"fit", "--set", "simulation.n=300", "--set", "folds=1"}), kConfigError);
}

TEST_F(CliTest, FitFailureIsExitFour) {
  // 20 units cannot carry 30 distinct cluster centers.
  EXPECT_EQ(run({"fit", "--set", "simulation.n=20", "--set", "k=30", "--set", "folds=2", "--out",
                 dir_.string()}),
            kFitError)
      << err_.str();
}

TEST_F(CliTest, SimulateWritesDeterministicOutputs) {
  const std::vector<std::string> base{"simulate",        "--set", "simulation.ns=[100,200]", "--set",
                                      "simulation.reps=2", "--set", "simulation.eval_draws=500", "--set",
                                      "restarts=2"};
  auto a = base, b = base;
  a.insert(a.end(), {"--out", (dir_ / "a").string(), "--workers", "1", "--plots"});
  b.insert(b.end(), {"--out", (dir_ / "b").string(), "--workers", "3"});
  ASSERT_EQ(run(a), 0) << err_.str();
  ASSERT_EQ(run(b), 0) << err_.str();
  expect_csv(dir_ / "a" / "study_raw.csv", "n,estimator,rep,excess_risk,per_center_l1,moment_residual,failed");
  expect_csv(dir_ / "a" / "study_summary.csv",
             "n,estimator,median_excess_risk,median_per_center_l1,failed,excess_risk_slope,per_center_l1_slope");
  EXPECT_EQ(line_count(slurp(dir_ / "a" / "study_raw.csv")), 9u);
  EXPECT_EQ(slurp(dir_ / "a" / "study_raw.csv"), slurp(dir_ / "b" / "study_raw.csv"));
  EXPECT_EQ(slurp(dir_ / "a" / "study_summary.csv"), slurp(dir_ / "b" / "study_summary.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "a" / "excess_risk.svg"));
  EXPECT_TRUE(fs::exists(dir_ / "a" / "codebook_error.svg"));
  EXPECT_FALSE(fs::exists(dir_ / "b" / "excess_risk.svg"));
}

TEST_F(CliTest, SimulateRejectsZeroReps) {
  EXPECT_EQ(run({"simulate", "--set", "simulation.reps=0", "--out", dir_.string()}), kConfigError);
  EXPECT_EQ(run({"simulate", "--set", "input=a.csv", "--out", dir_.string()}), kConfigError);
}

TEST_F(CliTest, DiagnoseOnSimulatedOracleMeans) {
  const auto out = dir_ / "d";
  ASSERT_EQ(run({"diagnose", "--set", "simulation.n=600", "--set", "diagnose.points=oracle", "--set",
                 "restarts=3", "--out", out.string()}),
            0)
      << err_.str();
  expect_csv(out / "elbow.csv", "k,wcss,relative_gain");
  EXPECT_EQ(line_count(slurp(out / "elbow.csv")), 11u);
  EXPECT_EQ(slurp(out / "boundary_mass.csv"), "t,bisector_mass,gap_mass\n0.10000000000000001,0,0\n0.5,0,0\n1,0,0\n");
  expect_csv(out / "profile_covariates.csv", "cluster,size,cov,zmean");
  expect_csv(out / "profile_cates.csv", "cluster,pair,cate_mean,cate_sd");
  expect_csv(out / "cate_values.csv", "unit,cluster,tau21");
  EXPECT_EQ(line_count(slurp(out / "cate_values.csv")), 601u);
}

TEST_F(CliTest, DiagnoseInputNeedsExistingCenters) {
  const auto fit_out = dir_ / "f";
  ASSERT_EQ(run({"fit", "--set", "simulation.n=300", "--set", "k=3", "--out", fit_out.string()}), 0);
  const std::string input = "input=" + (fit_out / "sample.csv").string();
  EXPECT_EQ(run({"diagnose", "--set", input, "--set", "diagnose.centers=" + (dir_ / "nope.csv").string(),
                 "--out", dir_.string()}),
            kDataError);
  EXPECT_EQ(run({"diagnose", "--set", input, "--out", dir_.string()}), kConfigError);
  const auto out = dir_ / "d";
  ASSERT_EQ(run({"diagnose", "--set", input, "--set", "diagnose.centers=" + (fit_out / "centers.csv").string(),
                 "--set", "diagnose.k_max=4", "--out", out.string()}),
            0)
      << err_.str();
  EXPECT_EQ(line_count(slurp(out / "elbow.csv")), 5u);
}

TEST(RunConfigParse, DefaultsAndOverrides) {
  const RunConfig c = parse_run_config(R"({"k": 4, "outcome": {"features": [2], "degree": 3}})",
                                       {"simulation.delta=0.5", "out=results dir", "method=newton",
                                        "diagnose.t_grid=[0.25]", "seed=7"});
  EXPECT_EQ(c.k, 4);
  ASSERT_TRUE(c.simulation);
  EXPECT_EQ(c.simulation->study.delta, 0.5);
  EXPECT_EQ(c.out, "results dir");
  EXPECT_EQ(c.method, SemiMethod::newton);
  EXPECT_EQ(c.diagnose.t_grid, std::vector<double>{0.25});
  EXPECT_EQ(c.seed, 7u);
  const SimConfig s = c.study_config();
  EXPECT_EQ(s.outcome.features.features, std::vector<int>{2});
  EXPECT_EQ(s.outcome.features.degree, 3);
  EXPECT_EQ(s.propensity.features.features, (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(s.k, 4);
  EXPECT_EQ(s.seed, 7u);
  EXPECT_EQ(c.outcome_spec(5).features.features, std::vector<int>{2});
  EXPECT_EQ(c.propensity_spec(3).features.features, (std::vector<int>{1, 2, 3}));
}

TEST(RunConfigParse, Invariants) {
  EXPECT_THROW(parse_run_config("", {}).validate(), ConfigError);
  EXPECT_NO_THROW(parse_run_config("", {"input=a.csv"}).validate());
  EXPECT_THROW(parse_run_config("", {"input=a.csv", "k=0"}).validate(), ConfigError);
  EXPECT_THROW(parse_run_config("[1,2]", {}), ConfigError);
  EXPECT_THROW(parse_run_config("", {"simulation.nuisance=magic"}), ConfigError);
  EXPECT_THROW(parse_run_config("", {"simulation.bogus=1"}), ConfigError);
}

TEST(SvgChart, SeriesAndLogAxes) {
  LogLogChart chart;
  chart.title = "Excess risk";
  chart.x_label = "n";
  chart.y_label = "risk";
  chart.series.push_back(Series{"plug_in", {500, 1000, 2000}, {3.0, 2.5, 2.0}});
  chart.series.push_back(Series{"semi<param>", {500, 1000, 2000}, {0.5, -1.0, 0.1}});
  const std::string svg = render_loglog_svg(chart);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_EQ(std::count(svg.begin(), svg.end(), '\n') > 10, true);
  std::size_t polylines = 0;
  for (std::size_t pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1))
    ++polylines;
  EXPECT_EQ(polylines, 2u);
  EXPECT_NE(svg.find("semi&lt;param&gt;"), std::string::npos);
  EXPECT_NE(svg.find(">1000<"), std::string::npos);
  EXPECT_NE(svg.find(">0.1<"), std::string::npos);
  // The nonpositive value is dropped: five markers remain.
  std::size_t circles = 0;
  for (std::size_t pos = svg.find("<circle"); pos != std::string::npos; pos = svg.find("<circle", pos + 1))
    ++circles;
  EXPECT_EQ(circles, 5u);
}

}  // namespace
}  // namespace causalkm::cli
