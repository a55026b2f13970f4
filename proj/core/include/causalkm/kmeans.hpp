#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "causalkm/dataset.hpp"
#include "causalkm/random.hpp"

namespace causalkm {

/// k centers in the p-dimensional counterfactual-mean space, one per row.
struct Codebook {
  Matrix centers;

  Eigen::Index k() const { return centers.rows(); }
  Eigen::Index dim() const { return centers.cols(); }
};

struct Projection {
  Eigen::Index index = 0;  // 0-based
  Eigen::RowVectorXd center;
};

/// Nearest center in squared Euclidean distance; ties go to the lowest index.
Projection project(const ConstRowRef& x, const Codebook& codebook);
Eigen::Index nearest_center(const Matrix& points, Eigen::Index row, const Matrix& centers);
IntVector assign(const Matrix& points, const Codebook& codebook);

/// (1/n) sum_i ||x_i - Pi_C(x_i)||^2
double empirical_risk(const Matrix& points, const Codebook& codebook);

/// D^2-weighted seeding. Throws InitError when fewer than k distinct rows.
Codebook kmeanspp_init(const Matrix& points, Eigen::Index k, Rng& rng);

Eigen::Index count_distinct_rows(const Matrix& points);

/// Center update shared by Lloyd and its generalized variant: the mean of the
/// `targets` rows in each cell. An empty cell is moved onto the `points` row
/// farthest from its own updated center. Returns the number of reseeded cells
/// through `reseeded` when given.
Matrix update_centers(const Matrix& points, const Matrix& targets, const IntVector& labels,
                      Eigen::Index k, int* reseeded = nullptr);

struct FitResult {
  Codebook codebook;
  IntVector assignments;  // 0-based
  double risk = 0.0;
  int iterations = 0;
  bool converged = false;
  int restarts_used = 0;
  bool degenerate = false;  // duplicated centers survived repair
  double moment_residual = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> risk_trace;    // risk at every iterate, starting with the initial one
  std::vector<Matrix> center_trace;  // filled when requested
};

struct LloydOptions {
  double tol = 1e-10;  // relative risk decrease
  int max_iter = 300;
  bool record_centers = false;
};

FitResult lloyd(const Matrix& points, const Codebook& init, const LloydOptions& opts = {});

struct PlugInOptions {
  int restarts = 10;
  LloydOptions lloyd;
};

/// k-means on the estimated counterfactual means: `restarts` runs of
/// k-means++ followed by Lloyd, each with its own stream derived from
/// `seed`. Returns the minimum-risk run.
FitResult plug_in_estimate(const Matrix& points, Eigen::Index k, std::uint64_t seed,
                           const PlugInOptions& opts = {});
FitResult plug_in_estimate(const CounterfactualMatrix& mu_hat, Eigen::Index k, std::uint64_t seed,
                           const PlugInOptions& opts = {});

/// Exhaustive search over all partitions into k nonempty groups. Test oracle;
/// limited to n <= 12 and k <= 3.
Codebook brute_force_codebook(const Matrix& points, Eigen::Index k);

}  // namespace causalkm
