#include "run_config.hpp"

#include <fstream>
#include <sstream>
#include <thread>

#include "causalkm/errors.hpp"
#include "json.hpp"

namespace causalkm::cli {

using nlohmann::json;

namespace {

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' must look like key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("empty path segment in override '" + key + "'");
    if (!node->is_object()) *node = json::object();
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = std::move(value);
}

template <typename T>
void take(const json& obj, const char* key, T& dest) {
  if (obj.contains(key)) dest = obj.at(key).get<T>();
}

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok |= key == a;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

NuisanceOptions parse_nuisance(const json& obj, const std::string& where, bool outcome) {
  if (outcome) check_keys(obj, where, {"model", "features", "degree", "neighbors"});
  else check_keys(obj, where, {"features", "degree"});
  NuisanceOptions opt;
  if (obj.contains("features")) opt.features = obj.at("features").get<std::vector<int>>();
  take(obj, "degree", opt.degree);
  if (opt.degree < 1) throw ConfigError(where + ".degree must be at least 1");
  if (obj.contains("model")) {
    const auto m = obj.at("model").get<std::string>();
    if (m == "ols") opt.family = OutcomeFamily::ols;
    else if (m == "knn") opt.family = OutcomeFamily::knn;
    else throw ConfigError("unknown outcome model '" + m + "'");
  }
  take(obj, "neighbors", opt.neighbors);
  return opt;
}

SimulationBlock parse_simulation(const json& obj) {
  check_keys(obj, "simulation", {"n", "delta", "sigma", "ns", "reps", "eval_draws", "nuisance", "estimators"});
  SimulationBlock b;
  take(obj, "n", b.n);
  take(obj, "delta", b.study.delta);
  take(obj, "sigma", b.study.sigma);
  take(obj, "ns", b.study.ns);
  take(obj, "reps", b.study.reps);
  take(obj, "eval_draws", b.study.eval_draws);
  if (obj.contains("nuisance")) {
    const auto s = obj.at("nuisance").get<std::string>();
    if (s == "estimated") b.study.nuisance = NuisanceSource::estimated;
    else if (s == "oracle") b.study.nuisance = NuisanceSource::oracle;
    else throw ConfigError("unknown nuisance source '" + s + "'");
  }
  if (obj.contains("estimators")) {
    b.study.estimators.clear();
    for (const auto& e : obj.at("estimators")) b.study.estimators.push_back(parse_estimator(e.get<std::string>()));
  }
  if (b.n < 1) throw ConfigError("simulation.n must be positive");
  return b;
}

FeatureSpec resolve(const NuisanceOptions& opt, Eigen::Index d) {
  FeatureSpec f;
  f.degree = opt.degree;
  if (opt.features) {
    f.features = *opt.features;
  } else {
    for (Eigen::Index c = 1; c <= d; ++c) f.features.push_back(static_cast<int>(c));
  }
  return f;
}

}  // namespace

void RunConfig::validate() const {
  if (input.has_value() == simulation.has_value())
    throw ConfigError("exactly one of 'input' and 'simulation' must be given");
  if (k < 1) throw ConfigError("k must be at least 1");
  if (folds < 2) throw ConfigError("folds must be at least 2");
  if (restarts < 1) throw ConfigError("restarts must be at least 1");
  if (!(clip_epsilon > 0.0 && clip_epsilon < 0.5)) throw ConfigError("clip_epsilon must lie in (0, 0.5)");
  if (diagnose.k_min < 1 || diagnose.k_max < diagnose.k_min)
    throw ConfigError("diagnose needs 1 <= k_min <= k_max");
  for (double t : diagnose.t_grid)
    if (!(t >= 0.0)) throw ConfigError("diagnose.t_grid values must be nonnegative");
  if (workers < 1) throw ConfigError("workers must be at least 1");
}

OutcomeSpec RunConfig::outcome_spec(Eigen::Index d) const {
  OutcomeSpec s;
  s.features = resolve(outcome, d);
  s.family = outcome.family;
  s.knn_neighbors = outcome.neighbors;
  return s;
}

PropensitySpec RunConfig::propensity_spec(Eigen::Index d) const {
  return PropensitySpec{resolve(propensity, d), clip_epsilon};
}

SimConfig RunConfig::study_config() const {
  SimConfig cfg = simulation ? simulation->study : SimConfig{};
  cfg.seed = seed;
  cfg.folds = folds;
  cfg.k = k;
  cfg.restarts = restarts;
  cfg.method = method;
  cfg.propensity.clip_epsilon = clip_epsilon;
  if (outcome.features) cfg.outcome.features.features = *outcome.features;
  cfg.outcome.features.degree = outcome.degree;
  cfg.outcome.family = outcome.family;
  cfg.outcome.knn_neighbors = outcome.neighbors;
  if (propensity.features) cfg.propensity.features.features = *propensity.features;
  cfg.propensity.features.degree = propensity.degree;
  return cfg;
}

RunConfig parse_run_config(const std::string& json_text, const std::vector<std::string>& overrides) {
  try {
    json doc = json::object();
    if (json_text.find_first_not_of(" \t\r\n") != std::string::npos) doc = json::parse(json_text);
    if (!doc.is_object()) throw ConfigError("configuration must be a JSON object");
    for (const auto& o : overrides) apply_override(doc, o);

    check_keys(doc, "configuration",
               {"input", "arms", "simulation", "k", "estimator", "method", "folds", "seed", "restarts",
                "clip_epsilon", "parametrization", "outcome", "propensity", "diagnose", "out", "plots",
                "workers"});
    RunConfig cfg;
    cfg.workers = std::max(1u, std::thread::hardware_concurrency());
    if (doc.contains("input")) cfg.input = doc.at("input").get<std::string>();
    take(doc, "arms", cfg.arms);
    if (doc.contains("simulation")) cfg.simulation = parse_simulation(doc.at("simulation"));
    take(doc, "k", cfg.k);
    if (doc.contains("estimator")) cfg.estimator = parse_estimator(doc.at("estimator").get<std::string>());
    if (doc.contains("method")) cfg.method = parse_semi_method(doc.at("method").get<std::string>());
    take(doc, "folds", cfg.folds);
    take(doc, "seed", cfg.seed);
    take(doc, "restarts", cfg.restarts);
    take(doc, "clip_epsilon", cfg.clip_epsilon);
    if (doc.contains("parametrization"))
      cfg.parametrization = parse_parametrization(doc.at("parametrization").get<std::string>());
    if (doc.contains("outcome")) cfg.outcome = parse_nuisance(doc.at("outcome"), "outcome", true);
    if (doc.contains("propensity")) cfg.propensity = parse_nuisance(doc.at("propensity"), "propensity", false);
    if (doc.contains("diagnose")) {
      const auto& d = doc.at("diagnose");
      check_keys(d, "diagnose", {"k_min", "k_max", "t_grid", "centers", "points"});
      take(d, "k_min", cfg.diagnose.k_min);
      take(d, "k_max", cfg.diagnose.k_max);
      take(d, "t_grid", cfg.diagnose.t_grid);
      if (d.contains("centers")) cfg.diagnose.centers = d.at("centers").get<std::string>();
      if (d.contains("points")) {
        const auto p = d.at("points").get<std::string>();
        if (p == "oracle") cfg.diagnose.oracle_points = true;
        else if (p != "estimated") throw ConfigError("diagnose.points must be 'estimated' or 'oracle'");
      }
    }
    if (doc.contains("out")) cfg.out = doc.at("out").get<std::string>();
    take(doc, "plots", cfg.plots);
    if (doc.contains("workers")) {
      const int w = doc.at("workers").get<int>();
      if (w < 1) throw ConfigError("workers must be at least 1");
      cfg.workers = static_cast<unsigned>(w);
    }
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("configuration: ") + e.what());
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace causalkm::cli
