#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "causalkm/kmeans.hpp"

namespace causalkm {

struct ElbowRow {
  Eigen::Index k = 0;
  double wcss = 0.0;
  std::optional<double> relative_gain;  // (wcss(k-1) - wcss(k)) / wcss(1), k >= 2
};

using ElbowTable = std::vector<ElbowRow>;

/// Within-cluster sum of squares for k = k_min..k_max. Each k keeps the
/// better of a fresh plug-in fit and a Lloyd run warm-started from the
/// k-1 solution plus one D^2 draw, so wcss never increases with k.
ElbowTable elbow_scan(const Matrix& points, Eigen::Index k_min, Eigen::Index k_max, int restarts,
                      std::uint64_t seed);

/// Largest k whose relative gain exceeds `threshold` (0 when none does).
Eigen::Index last_substantial_gain(const ElbowTable& table, double threshold);

struct CodebookError {
  double raw_l1 = 0.0;
  double per_center = 0.0;
  std::vector<Eigen::Index> matching;  // estimated center j is matched to matching[j]
};

/// Minimum over center permutations of sum_j ||c_hat_j - c*_sigma(j)||_1.
CodebookError codebook_error(const Codebook& estimate, const Codebook& truth);

/// Minimum-cost perfect matching for a square cost matrix (Hungarian
/// algorithm); result[row] = column.
std::vector<Eigen::Index> min_cost_assignment(const Matrix& cost);

struct BoundaryDistances {
  Vector bisector;  // Euclidean distance to the boundary of the own Voronoi cell
  Vector gap;       // second-nearest minus nearest center distance
};

BoundaryDistances boundary_distances(const Matrix& points, const Codebook& codebook);

struct BoundaryMass {
  double bisector = 0.0;  // share with boundary distance <= t
  double gap = 0.0;       // share with gap <= 2t
};

BoundaryMass boundary_mass(const Matrix& points, const Codebook& codebook, double t);

struct CateSummary {
  int arm = 2;       // tau_{arm, baseline} = mu_arm - mu_baseline
  int baseline = 1;
  double mean = 0.0;
  double sd = 0.0;
};

struct ClusterSummary {
  Eigen::Index size = 0;
  std::vector<double> zmeans;      // per covariate; empty for empty clusters
  std::vector<CateSummary> cates;  // per arm pair; empty for empty clusters
};

struct ClusterProfile {
  std::vector<ClusterSummary> clusters;
  std::vector<bool> zero_variance;  // covariates whose z-scores were set to 0
  std::vector<std::pair<int, int>> pairs;
};

/// Standardized covariate means and pairwise CATE summaries per cluster.
/// `assignments` holds 0-based labels in [0, k).
ClusterProfile cluster_profiles(const Dataset& data, const CounterfactualMatrix& mu_hat,
                                const IntVector& assignments, Eigen::Index k);

}  // namespace causalkm
