#include "causalkm/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "causalkm/errors.hpp"

namespace causalkm {

namespace {

constexpr double kConditionLimit = 1e12;
constexpr double kSeparationNorm = 50.0;
constexpr double kSeparationRidge = 1e-4;
constexpr double kScoreTolerance = 1e-8;
constexpr int kMaxNewtonIterations = 100;

std::vector<Eigen::Index> selected_rows(const Dataset& data, const std::vector<bool>& mask,
                                        int arm) {
  if (static_cast<Eigen::Index>(mask.size()) != data.n())
    throw ShapeError("training mask length does not match the sample size");
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < data.n(); ++i)
    if (mask[static_cast<std::size_t>(i)] && (arm == 0 || data.arms()(i) == arm)) rows.push_back(i);
  return rows;
}

Matrix take_rows(const Matrix& m, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(rows[r]);
  return out;
}

void check_features(const FeatureSpec& spec, Eigen::Index d) {
  if (spec.degree < 1) throw ConfigError("basis degree must be at least 1");
  for (int f : spec.features)
    if (f < 1 || f > d)
      throw ConfigError("feature index " + std::to_string(f) + " outside 1.." + std::to_string(d));
}

Matrix select_columns(const Matrix& x, const FeatureSpec& spec) {
  Matrix out(x.rows(), static_cast<Eigen::Index>(spec.features.size()));
  for (std::size_t j = 0; j < spec.features.size(); ++j)
    out.col(static_cast<Eigen::Index>(j)) = x.col(spec.features[j] - 1);
  return out;
}

// Softmax over (0, eta_2, ..., eta_p) for every row.
Matrix softmax_with_reference(const Matrix& eta) {
  Matrix probs(eta.rows(), eta.cols() + 1);
  for (Eigen::Index i = 0; i < eta.rows(); ++i) {
    const double top = std::max(0.0, eta.row(i).maxCoeff());
    double denom = std::exp(-top);
    probs(i, 0) = denom;
    for (Eigen::Index a = 0; a < eta.cols(); ++a) {
      probs(i, a + 1) = std::exp(eta(i, a) - top);
      denom += probs(i, a + 1);
    }
    probs.row(i) /= denom;
  }
  return probs;
}

struct LogitFit {
  Matrix theta;
  int iterations = 0;
  bool converged = false;
  bool diverging = false;
};

// Newton ascent with step halving on the mean penalized log-likelihood. The
// intercept row is not penalized.
LogitFit fit_multinomial_logit(const Matrix& design, const std::vector<int>& arms, int p,
                               double lambda) {
  const Eigen::Index n = design.rows();
  const Eigen::Index q = design.cols();
  const Eigen::Index m = p - 1;
  Matrix indicator = Matrix::Zero(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    if (arms[static_cast<std::size_t>(i)] > 1) indicator(i, arms[static_cast<std::size_t>(i)] - 2) = 1.0;

  auto objective = [&](const Matrix& theta) {
    const Matrix eta = design * theta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double top = std::max(0.0, eta.row(i).maxCoeff());
      double s = std::exp(-top);
      for (Eigen::Index a = 0; a < m; ++a) s += std::exp(eta(i, a) - top);
      const int arm = arms[static_cast<std::size_t>(i)];
      ll += (arm > 1 ? eta(i, arm - 2) : 0.0) - (top + std::log(s));
    }
    const double penalty = theta.bottomRows(q - 1).squaredNorm();
    return ll / static_cast<double>(n) - 0.5 * lambda * penalty;
  };

  LogitFit fit;
  fit.theta = Matrix::Zero(q, m);
  double current = objective(fit.theta);
  for (int it = 1; it <= kMaxNewtonIterations; ++it) {
    const Matrix probs = softmax_with_reference(design * fit.theta);
    const Matrix resid = indicator - probs.rightCols(m);
    Matrix grad = design.transpose() * resid / static_cast<double>(n);
    grad.bottomRows(q - 1) -= lambda * fit.theta.bottomRows(q - 1);
    if (grad.cwiseAbs().maxCoeff() < kScoreTolerance) {
      fit.converged = true;
      break;
    }
    fit.iterations = it;

    Matrix hessian = Matrix::Zero(q * m, q * m);
    for (Eigen::Index a = 0; a < m; ++a) {
      for (Eigen::Index b = a; b < m; ++b) {
        Vector w = probs.col(a + 1).cwiseProduct(
            (a == b ? Vector::Ones(n) : Vector::Zero(n)) - probs.col(b + 1));
        Matrix block = design.transpose() * w.asDiagonal() * design / static_cast<double>(n);
        hessian.block(a * q, b * q, q, q) = block;
        if (a != b) hessian.block(b * q, a * q, q, q) = block.transpose();
      }
      for (Eigen::Index r = 1; r < q; ++r) hessian(a * q + r, a * q + r) += lambda;
    }
    const Vector g = Eigen::Map<const Vector>(grad.data(), grad.size());
    Eigen::LDLT<Matrix> ldlt(hessian);
    Vector delta = ldlt.solve(g);
    if (ldlt.info() != Eigen::Success || !delta.allFinite()) {
      hessian.diagonal().array() += 1e-10 * (1.0 + hessian.diagonal().cwiseAbs().maxCoeff());
      delta = hessian.ldlt().solve(g);
    }
    const Matrix step = Eigen::Map<const Matrix>(delta.data(), q, m);

    double t = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 40; ++halving, t *= 0.5) {
      const Matrix trial = fit.theta + t * step;
      const double value = objective(trial);
      if (std::isfinite(value) && value >= current) {
        fit.theta = trial;
        current = value;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      fit.converged = grad.cwiseAbs().maxCoeff() < std::sqrt(kScoreTolerance);
      break;
    }
    if (fit.theta.norm() > kSeparationNorm) {
      fit.diverging = true;
      break;
    }
  }
  return fit;
}

}  // namespace

Matrix expand_features(const Matrix& x, const FeatureSpec& spec) {
  check_features(spec, x.cols());
  Matrix out(x.rows(), 1 + spec.expanded_size());
  out.col(0).setOnes();
  Eigen::Index c = 1;
  for (int f : spec.features) {
    Vector power = x.col(f - 1);
    for (int deg = 1; deg <= spec.degree; ++deg) {
      out.col(c++) = power;
      power = power.cwiseProduct(x.col(f - 1));
    }
  }
  return out;
}

Vector OutcomeModel::predict(const Matrix& x) const {
  if (family == OutcomeFamily::ols) return expand_features(x, spec) * coefficients;

  const Matrix query = select_columns(x, spec);
  Vector out(x.rows());
  std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(train_features.rows()));
  const auto kk = static_cast<std::ptrdiff_t>(neighbors);
  for (Eigen::Index i = 0; i < query.rows(); ++i) {
    for (Eigen::Index t = 0; t < train_features.rows(); ++t)
      dist[static_cast<std::size_t>(t)] = {(train_features.row(t) - query.row(i)).squaredNorm(), t};
    std::partial_sort(dist.begin(), dist.begin() + kk, dist.end());
    double s = 0.0;
    for (std::ptrdiff_t r = 0; r < kk; ++r) s += train_y(dist[static_cast<std::size_t>(r)].second);
    out(i) = s / static_cast<double>(kk);
  }
  return out;
}

OutcomeModel fit_outcome_regression(const Dataset& data, int arm, const OutcomeSpec& spec,
                                    const std::vector<bool>& train_mask) {
  if (arm < 1 || arm > data.p()) throw ConfigError("arm " + std::to_string(arm) + " out of range");
  check_features(spec.features, data.d());
  const auto rows = selected_rows(data, train_mask, arm);
  const auto n_train = static_cast<Eigen::Index>(rows.size());

  OutcomeModel model;
  model.arm = arm;
  model.family = spec.family;
  model.spec = spec.features;

  Vector y(n_train);
  for (Eigen::Index r = 0; r < n_train; ++r) y(r) = data.y()(rows[static_cast<std::size_t>(r)]);

  if (spec.family == OutcomeFamily::knn) {
    if (n_train == 0) throw FitError("no training units for arm " + std::to_string(arm));
    model.train_features = select_columns(take_rows(data.x(), rows), spec.features);
    model.train_y = std::move(y);
    int k = spec.knn_neighbors;
    if (k <= 0) k = static_cast<int>(std::ceil(std::pow(static_cast<double>(n_train), 0.8)));
    model.neighbors = static_cast<int>(std::min<Eigen::Index>(k, n_train));
    return model;
  }

  const Matrix design = expand_features(take_rows(data.x(), rows), spec.features);
  const Eigen::Index q = design.cols();
  if (n_train < q && !spec.allow_ridge)
    throw FitError("degenerate fit for arm " + std::to_string(arm) + ": " +
                   std::to_string(n_train) + " units for " + std::to_string(q) + " parameters");

  Matrix gram = design.transpose() * design;
  const Vector rhs = design.transpose() * y;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  const bool ill_conditioned = !(lo > 0.0) || hi / lo > kConditionLimit;
  if (ill_conditioned) {
    if (!spec.allow_ridge)
      throw FitError("singular design for arm " + std::to_string(arm) + " and ridge disabled");
    model.ridge_lambda = 1e-8 * gram.trace() / static_cast<double>(q);
    model.ridge_engaged = true;
    gram.diagonal().array() += model.ridge_lambda;
    if (!(model.ridge_lambda > 0.0))
      throw FitError("singular design for arm " + std::to_string(arm) + " even with ridge");
  }
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success)
    throw FitError("singular design for arm " + std::to_string(arm) + " even with ridge");
  model.coefficients = llt.solve(rhs);
  if (!model.coefficients.allFinite())
    throw FitError("non-finite coefficients for arm " + std::to_string(arm));
  return model;
}

Matrix PropensityModel::predict(const Matrix& x) const {
  return softmax_with_reference(expand_features(x, spec) * coefficients);
}

Matrix PropensityModel::predict_clipped(const Matrix& x) const {
  Matrix probs = predict(x);
  for (Eigen::Index i = 0; i < probs.rows(); ++i)
    probs.row(i) = clip_propensity(probs.row(i).transpose(), clip_epsilon).transpose();
  return probs;
}

PropensityModel fit_propensity(const Dataset& data, const PropensitySpec& spec,
                               const std::vector<bool>& train_mask) {
  if (!(spec.clip_epsilon > 0.0 && spec.clip_epsilon < 0.5))
    throw ConfigError("propensity clip epsilon must lie in (0, 0.5)");
  check_features(spec.features, data.d());
  const auto rows = selected_rows(data, train_mask, 0);
  std::vector<int> arms(rows.size());
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(data.p()) + 1, 0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    arms[r] = data.arms()(rows[r]);
    ++counts[static_cast<std::size_t>(arms[r])];
  }
  for (int a = 1; a <= data.p(); ++a)
    if (counts[static_cast<std::size_t>(a)] == 0)
      throw FitError("arm " + std::to_string(a) + " absent from propensity training data");

  const Matrix design = expand_features(take_rows(data.x(), rows), spec.features);
  LogitFit fit = fit_multinomial_logit(design, arms, data.p(), 0.0);

  PropensityModel model;
  model.spec = spec.features;
  model.p = data.p();
  model.clip_epsilon = spec.clip_epsilon;
  // Complete separation can also stop the iteration early with every unit
  // fitted almost perfectly, before the coefficients blow up.
  bool perfect = !arms.empty();
  const Matrix fitted = softmax_with_reference(design * fit.theta);
  for (std::size_t r = 0; r < arms.size() && perfect; ++r)
    perfect = fitted(static_cast<Eigen::Index>(r), arms[r] - 1) > 1.0 - 1e-6;
  if (fit.diverging || perfect || fit.theta.norm() > kSeparationNorm) {
    model.separation_warning = true;
    model.ridge_lambda = kSeparationRidge;
    fit = fit_multinomial_logit(design, arms, data.p(), kSeparationRidge);
  }
  model.coefficients = std::move(fit.theta);
  model.iterations = fit.iterations;
  model.converged = fit.converged;
  return model;
}

Vector clip_propensity(const Vector& pi_row, double eps) {
  return pi_row.cwiseMax(eps).cwiseMin(1.0 - eps);
}

void influence_scores(double y, int arm, const ConstRowRef& mu_row,
                      const ConstRowRef& pi_row,
                      RowRef phi1, RowRef phi2) {
  phi1 = mu_row;
  phi2 = mu_row.cwiseProduct(mu_row);
  const Eigen::Index a = arm - 1;
  const double weighted = (y - mu_row(a)) / pi_row(a);
  phi1(a) += weighted;
  phi2(a) += 2.0 * mu_row(a) * weighted;
}

namespace {

void fill_scores(const Dataset& data, CrossFitScores& s) {
  s.phi1.resize(s.mu_hat.rows(), s.mu_hat.cols());
  s.phi2.resize(s.mu_hat.rows(), s.mu_hat.cols());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    influence_scores(data.y()(i), data.arms()(i), s.mu_hat.row(i), s.pi_hat.row(i), s.phi1.row(i),
                     s.phi2.row(i));
  }
}

}  // namespace

CrossFitScores cross_fit(const Dataset& data, const FoldAssignment& folds,
                         const OutcomeSpec& outcome_spec, const PropensitySpec& propensity_spec) {
  if (static_cast<Eigen::Index>(folds.labels.size()) != data.n())
    throw ShapeError("fold assignment length does not match the sample size");
  CrossFitScores s;
  s.K = folds.K;
  s.fold_of = folds.labels;
  s.mu_hat.resize(data.n(), data.p());
  s.pi_hat.resize(data.n(), data.p());

  for (int b = 1; b <= folds.K; ++b) {
    std::vector<bool> train(folds.labels.size());
    std::vector<Eigen::Index> eval_rows;
    for (std::size_t i = 0; i < folds.labels.size(); ++i) {
      train[i] = folds.labels[i] != b;
      if (!train[i]) eval_rows.push_back(static_cast<Eigen::Index>(i));
    }
    if (eval_rows.empty()) continue;
    const Matrix x_eval = take_rows(data.x(), eval_rows);
    try {
      Matrix mu_eval(x_eval.rows(), data.p());
      for (int a = 1; a <= data.p(); ++a)
        mu_eval.col(a - 1) = fit_outcome_regression(data, a, outcome_spec, train).predict(x_eval);
      const Matrix pi_eval = fit_propensity(data, propensity_spec, train).predict_clipped(x_eval);
      for (std::size_t r = 0; r < eval_rows.size(); ++r) {
        s.mu_hat.row(eval_rows[r]) = mu_eval.row(static_cast<Eigen::Index>(r));
        s.pi_hat.row(eval_rows[r]) = pi_eval.row(static_cast<Eigen::Index>(r));
      }
    } catch (const FitError& e) {
      throw FitError("fold " + std::to_string(b) + ": " + e.what());
    }
  }
  fill_scores(data, s);
  return s;
}

CrossFitScores scores_from_nuisances(const Dataset& data, const Matrix& mu, const Matrix& pi,
                                     double eps) {
  if (mu.rows() != data.n() || pi.rows() != data.n() || mu.cols() != data.p() ||
      pi.cols() != data.p())
    throw ShapeError("nuisance matrices must be n x p");
  CrossFitScores s;
  s.K = 1;
  s.fold_of.assign(static_cast<std::size_t>(data.n()), 1);
  s.mu_hat = mu;
  s.pi_hat.resize(pi.rows(), pi.cols());
  for (Eigen::Index i = 0; i < pi.rows(); ++i)
    s.pi_hat.row(i) = clip_propensity(pi.row(i).transpose(), eps).transpose();
  fill_scores(data, s);
  return s;
}

CrossFitScores reparametrize(const CrossFitScores& scores, Parametrization mode) {
  if (mode == scores.parametrization) {
    if (mode == Parametrization::contrasts_vs_baseline)
      throw StateError("scores are already in contrast parametrization");
    return scores;
  }
  CrossFitScores out = scores;
  out.parametrization = mode;
  out.mu_hat = reparametrize(CounterfactualMatrix{scores.mu_hat, scores.parametrization}, mode).values;
  out.phi1 = reparametrize(CounterfactualMatrix{scores.phi1, scores.parametrization}, mode).values;
  out.phi2 = (2.0 * out.mu_hat.array() * (out.phi1.array() - out.mu_hat.array()) +
              out.mu_hat.array().square())
                 .matrix();
  return out;
}

}  // namespace causalkm
