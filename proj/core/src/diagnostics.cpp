#include "causalkm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "causalkm/errors.hpp"

namespace causalkm {

ElbowTable elbow_scan(const Matrix& points, Eigen::Index k_min, Eigen::Index k_max, int restarts,
                      std::uint64_t seed) {
  if (k_min < 1 || k_max < k_min) throw ConfigError("elbow scan needs 1 <= k_min <= k_max");
  if (k_max > count_distinct_rows(points))
    throw ConfigError("k_max exceeds the number of distinct points");
  const double n = static_cast<double>(points.rows());

  std::vector<double> wcss(static_cast<std::size_t>(k_max) + 1, 0.0);
  Codebook previous;
  for (Eigen::Index k = 1; k <= k_max; ++k) {
    PlugInOptions opts;
    opts.restarts = restarts;
    FitResult fit = plug_in_estimate(points, k, seed + static_cast<std::uint64_t>(k), opts);
    if (k > 1) {
      // Warm start: previous centers plus one D^2 draw.
      auto rng = make_stream(seed, {0x656c626fULL, static_cast<std::uint64_t>(k)});
      Vector d2(points.rows());
      for (Eigen::Index i = 0; i < points.rows(); ++i)
        d2(i) = (points.row(i) - previous.centers.row(nearest_center(points, i, previous.centers)))
                    .squaredNorm();
      Codebook warm;
      warm.centers.resize(k, points.cols());
      warm.centers.topRows(k - 1) = previous.centers;
      const double target = uniform01(rng) * d2.sum();
      Eigen::Index pick = 0;
      double cum = 0.0;
      for (Eigen::Index i = 0; i < points.rows(); ++i) {
        if (d2(i) <= 0.0) continue;
        cum += d2(i);
        pick = i;
        if (cum > target) break;
      }
      warm.centers.row(k - 1) = points.row(pick);
      FitResult warm_fit = lloyd(points, warm);
      if (warm_fit.risk < fit.risk) fit = std::move(warm_fit);
    }
    wcss[static_cast<std::size_t>(k)] = n * fit.risk;
    previous = fit.codebook;
  }

  ElbowTable table;
  for (Eigen::Index k = k_min; k <= k_max; ++k) {
    ElbowRow row;
    row.k = k;
    row.wcss = wcss[static_cast<std::size_t>(k)];
    if (k >= 2) {
      const double base = wcss[1];
      row.relative_gain =
          base > 0.0 ? (wcss[static_cast<std::size_t>(k) - 1] - row.wcss) / base : 0.0;
    }
    table.push_back(row);
  }
  return table;
}

Eigen::Index last_substantial_gain(const ElbowTable& table, double threshold) {
  Eigen::Index last = 0;
  for (const auto& row : table)
    if (row.relative_gain && *row.relative_gain > threshold) last = row.k;
  return last;
}

std::vector<Eigen::Index> min_cost_assignment(const Matrix& cost) {
  const Eigen::Index n = cost.rows();
  if (cost.cols() != n) throw ShapeError("assignment cost matrix must be square");
  const double inf = std::numeric_limits<double>::infinity();
  // Potentials formulation with 1-based sentinels (column 0 is virtual).
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<Eigen::Index> match(static_cast<std::size_t>(n) + 1, 0), way(static_cast<std::size_t>(n) + 1, 0);
  for (Eigen::Index i = 1; i <= n; ++i) {
    match[0] = i;
    Eigen::Index j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
    std::vector<bool> used(static_cast<std::size_t>(n) + 1, false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const Eigen::Index i0 = match[static_cast<std::size_t>(j0)];
      double delta = inf;
      Eigen::Index j1 = 0;
      for (Eigen::Index j = 1; j <= n; ++j) {
        const auto sj = static_cast<std::size_t>(j);
        if (used[sj]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[sj];
        if (cur < minv[sj]) {
          minv[sj] = cur;
          way[sj] = j0;
        }
        if (minv[sj] < delta) {
          delta = minv[sj];
          j1 = j;
        }
      }
      for (Eigen::Index j = 0; j <= n; ++j) {
        const auto sj = static_cast<std::size_t>(j);
        if (used[sj]) {
          u[static_cast<std::size_t>(match[sj])] += delta;
          v[sj] -= delta;
        } else {
          minv[sj] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const Eigen::Index j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Eigen::Index> result(static_cast<std::size_t>(n));
  for (Eigen::Index j = 1; j <= n; ++j)
    result[static_cast<std::size_t>(match[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return result;
}

CodebookError codebook_error(const Codebook& estimate, const Codebook& truth) {
  if (estimate.k() != truth.k() || estimate.dim() != truth.dim())
    throw ShapeError("codebooks differ in size or dimension");
  const Eigen::Index k = estimate.k();
  Matrix cost(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      cost(i, j) = (estimate.centers.row(i) - truth.centers.row(j)).lpNorm<1>();

  CodebookError err;
  if (k <= 8) {
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
      double s = 0.0;
      for (Eigen::Index i = 0; i < k; ++i) s += cost(i, perm[static_cast<std::size_t>(i)]);
      if (s < best) {
        best = s;
        err.matching = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    err.matching = min_cost_assignment(cost);
  }
  for (Eigen::Index i = 0; i < k; ++i) err.raw_l1 += cost(i, err.matching[static_cast<std::size_t>(i)]);
  err.per_center = err.raw_l1 / static_cast<double>(k);
  return err;
}

BoundaryDistances boundary_distances(const Matrix& points, const Codebook& codebook) {
  if (points.cols() != codebook.dim()) throw ShapeError("point and codebook dimensions differ");
  const Eigen::Index n = points.rows();
  const Eigen::Index k = codebook.k();
  BoundaryDistances out;
  const double inf = std::numeric_limits<double>::infinity();
  out.bisector = Vector::Constant(n, inf);
  out.gap = Vector::Constant(n, inf);
  if (k < 2) return out;
  const Matrix& c = codebook.centers;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index own = nearest_center(points, i, c);
    const double d_own = (points.row(i) - c.row(own)).squaredNorm();
    double second = inf;
    double bis = inf;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (j == own) continue;
      const double d_j = (points.row(i) - c.row(j)).squaredNorm();
      second = std::min(second, d_j);
      const double sep = (c.row(own) - c.row(j)).norm();
      if (sep > 0.0) bis = std::min(bis, (d_j - d_own) / (2.0 * sep));
      else bis = 0.0;
    }
    out.bisector(i) = std::max(0.0, bis);
    out.gap(i) = std::sqrt(second) - std::sqrt(d_own);
  }
  return out;
}

BoundaryMass boundary_mass(const Matrix& points, const Codebook& codebook, double t) {
  if (t < 0.0) throw ConfigError("boundary distance threshold must be nonnegative");
  if (points.rows() == 0) return {};
  const auto dist = boundary_distances(points, codebook);
  const double n = static_cast<double>(points.rows());
  BoundaryMass m;
  m.bisector = static_cast<double>((dist.bisector.array() <= t).count()) / n;
  m.gap = static_cast<double>((dist.gap.array() <= 2.0 * t).count()) / n;
  return m;
}

ClusterProfile cluster_profiles(const Dataset& data, const CounterfactualMatrix& mu_hat,
                                const IntVector& assignments, Eigen::Index k) {
  if (mu_hat.values.rows() != data.n() || assignments.size() != data.n())
    throw ShapeError("profile inputs must have one row per unit");
  if (k < 1) throw ConfigError("k must be at least 1");
  for (Eigen::Index i = 0; i < assignments.size(); ++i)
    if (assignments(i) < 0 || assignments(i) >= k) throw DataError("cluster label out of range");

  const Matrix levels = reparametrize(mu_hat, Parametrization::levels).values;
  const Eigen::Index d = data.d();
  const double n = static_cast<double>(data.n());

  ClusterProfile prof;
  const Eigen::RowVectorXd mean = data.x().colwise().mean();
  Eigen::RowVectorXd sd(d);
  prof.zero_variance.resize(static_cast<std::size_t>(d));
  for (Eigen::Index c = 0; c < d; ++c) {
    sd(c) = std::sqrt((data.x().col(c).array() - mean(c)).square().sum() / n);
    prof.zero_variance[static_cast<std::size_t>(c)] = !(sd(c) > 0.0);
  }
  for (int a = 2; a <= static_cast<int>(levels.cols()); ++a)
    for (int b = 1; b < a; ++b) prof.pairs.emplace_back(a, b);

  prof.clusters.resize(static_cast<std::size_t>(k));
  for (Eigen::Index j = 0; j < k; ++j) {
    std::vector<Eigen::Index> members;
    for (Eigen::Index i = 0; i < assignments.size(); ++i)
      if (assignments(i) == j) members.push_back(i);
    auto& cs = prof.clusters[static_cast<std::size_t>(j)];
    cs.size = static_cast<Eigen::Index>(members.size());
    if (members.empty()) continue;
    const double m = static_cast<double>(members.size());

    cs.zmeans.assign(static_cast<std::size_t>(d), 0.0);
    for (Eigen::Index c = 0; c < d; ++c) {
      if (prof.zero_variance[static_cast<std::size_t>(c)]) continue;
      double s = 0.0;
      for (auto i : members) s += (data.x()(i, c) - mean(c)) / sd(c);
      cs.zmeans[static_cast<std::size_t>(c)] = s / m;
    }
    for (const auto& [a, b] : prof.pairs) {
      double s = 0.0, ss = 0.0;
      for (auto i : members) s += levels(i, a - 1) - levels(i, b - 1);
      const double avg = s / m;
      for (auto i : members) {
        const double dv = levels(i, a - 1) - levels(i, b - 1) - avg;
        ss += dv * dv;
      }
      cs.cates.push_back(CateSummary{a, b, avg, std::sqrt(ss / m)});
    }
  }
  return prof;
}

}  // namespace causalkm
