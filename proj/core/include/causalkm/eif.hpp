#pragma once

#include "causalkm/kmeans.hpp"
#include "causalkm/nuisance.hpp"

namespace causalkm {

/// Uncentered influence-function score of the clustering risk at a fixed
/// codebook for one unit: sum_a { phi2_a - 2 phi1_a c_a + c_a^2 }, where c is
/// the projection of the unit's estimated mean vector.
double phi_C_score(const ConstRowRef& phi1_row,
                   const ConstRowRef& phi2_row,
                   const ConstRowRef& mu_hat_row, const Codebook& codebook);

struct GradientBlock {
  Matrix blocks;            // k x p, row j is the derivative in c_j
  IntVector active_counts;  // units per cell

  double max_abs() const { return blocks.size() ? blocks.cwiseAbs().maxCoeff() : 0.0; }
};

struct DerivativeMatrix {
  Vector proportions;  // cell shares, length k
  Vector diagonal;     // 2 * share repeated p times per cell, length k * p
  bool singular = false;
};

/// Cross-fitted risk estimate R_hat(C) and its first- and second-order
/// pieces. Assignment is always made on the estimated mean vectors, never on
/// the scores.
class SemiObjective {
 public:
  SemiObjective(const CrossFitScores& scores, Eigen::Index k);

  const CrossFitScores& scores() const { return *scores_; }
  Eigen::Index k() const { return k_; }
  Parametrization parametrization() const { return scores_->parametrization; }

  Vector unit_scores(const Codebook& codebook) const;
  double risk(const Codebook& codebook) const;
  GradientBlock gradient(const Codebook& codebook) const;

 private:
  const CrossFitScores* scores_;
  Eigen::Index k_;
};

double risk_hat(const CrossFitScores& scores, const Codebook& codebook);
GradientBlock gradient(const CrossFitScores& scores, const Codebook& codebook);
DerivativeMatrix derivative_matrix(const Matrix& mu_hat, const Codebook& codebook);

enum class SemiMethod { gradient_descent, generalized_lloyd, newton };

const char* to_string(SemiMethod m);
SemiMethod parse_semi_method(std::string_view name);

struct SemiOptions {
  double tol = 1e-8;  // on the sup-norm of the gradient
  int max_rounds = 100;  // generalized Lloyd label rounds and Newton steps
  int max_steps = 500;   // gradient descent
  double initial_step = 0.0;  // 0: 0.1 * diameter of the estimated means
  double backtrack = 0.5;
  bool record_centers = false;
};

/// Minimizes R_hat over codebooks of size k starting from `init`. Every
/// method tracks R_hat along its iterates and returns the best one visited.
/// `moment_residual` is the sup-norm of the gradient at the returned codebook.
FitResult minimize_semiparametric(const CrossFitScores& scores, Eigen::Index k,
                                  const Codebook& init, SemiMethod method,
                                  const SemiOptions& opts = {});

}  // namespace causalkm
