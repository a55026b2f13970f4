#pragma once

#include <vector>

#include "causalkm/dataset.hpp"

namespace causalkm {

/// Covariates (1-based indices) entering a regression, each expanded into
/// powers 1..degree. An intercept is always added.
struct FeatureSpec {
  std::vector<int> features;
  int degree = 1;

  Eigen::Index expanded_size() const {
    return static_cast<Eigen::Index>(features.size()) * degree;
  }
};

/// Design matrix [1, x_f, x_f^2, ..., x_f^degree, ...] for the rows of `x`.
Matrix expand_features(const Matrix& x, const FeatureSpec& spec);

enum class OutcomeFamily { ols, knn };

struct OutcomeSpec {
  FeatureSpec features;
  OutcomeFamily family = OutcomeFamily::ols;
  int knn_neighbors = 0;  // 0: ceil(n_arm^(4/5)), capped at the training size
  bool allow_ridge = true;
};

/// Per-arm outcome regression mu_a(x) = E(Y | X = x, A = a).
struct OutcomeModel {
  int arm = 1;
  OutcomeFamily family = OutcomeFamily::ols;
  FeatureSpec spec;
  Vector coefficients;  // ols: intercept first
  bool ridge_engaged = false;
  double ridge_lambda = 0.0;

  // knn only
  Matrix train_features;
  Vector train_y;
  int neighbors = 0;

  Vector predict(const Matrix& x) const;
};

OutcomeModel fit_outcome_regression(const Dataset& data, int arm, const OutcomeSpec& spec,
                                    const std::vector<bool>& train_mask);

struct PropensitySpec {
  FeatureSpec features;
  double clip_epsilon = 0.01;
};

/// Multinomial logistic regression with arm 1 as the reference category.
struct PropensityModel {
  FeatureSpec spec;
  Matrix coefficients;  // (1 + expanded) x (p - 1), column a-2 holds arm a
  int p = 2;
  double clip_epsilon = 0.01;
  int iterations = 0;
  bool converged = false;
  bool separation_warning = false;
  double ridge_lambda = 0.0;

  /// Rows on the probability simplex (unclipped).
  Matrix predict(const Matrix& x) const;
  Matrix predict_clipped(const Matrix& x) const;
};

PropensityModel fit_propensity(const Dataset& data, const PropensitySpec& spec,
                               const std::vector<bool>& train_mask);

/// Coordinatewise clamp to [eps, 1 - eps]; no renormalization.
Vector clip_propensity(const Vector& pi_row, double eps);

/// Cross-fitted nuisance values and uncentered influence-function scores,
/// one row per unit.
struct CrossFitScores {
  Matrix mu_hat;
  Matrix pi_hat;  // clipped
  Matrix phi1;
  Matrix phi2;
  std::vector<int> fold_of;
  int K = 1;
  Parametrization parametrization = Parametrization::levels;

  Eigen::Index n() const { return mu_hat.rows(); }
  Eigen::Index p() const { return mu_hat.cols(); }
};

/// phi1_a = 1(A=a)/pi_a (Y - mu_A) + mu_a and
/// phi2_a = 2 mu_a 1(A=a)/pi_a (Y - mu_A) + mu_a^2 for a single unit.
void influence_scores(double y, int arm, const ConstRowRef& mu_row,
                      const ConstRowRef& pi_row,
                      RowRef phi1, RowRef phi2);

CrossFitScores cross_fit(const Dataset& data, const FoldAssignment& folds,
                         const OutcomeSpec& outcome_spec, const PropensitySpec& propensity_spec);

/// Scores computed from externally supplied nuisance values (e.g. the true
/// regression functions in a simulation). Propensities are clipped at `eps`.
CrossFitScores scores_from_nuisances(const Dataset& data, const Matrix& mu, const Matrix& pi,
                                     double eps);

/// Linear reparametrization of the counterfactual coordinates. phi1 maps
/// like mu; phi2 is rebuilt as 2 nu (phi1_nu - nu) + nu^2 so it remains the
/// uncentered influence function of E[nu_a^2].
CrossFitScores reparametrize(const CrossFitScores& scores, Parametrization mode);

}  // namespace causalkm
