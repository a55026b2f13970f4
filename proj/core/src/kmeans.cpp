#include "causalkm/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "causalkm/errors.hpp"

namespace causalkm {

namespace {

double squared_distance(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    const double diff = a(i, c) - b(j, c);
    s += diff * diff;
  }
  return s;
}

double risk_with_labels(const Matrix& points, const Matrix& centers, const IntVector& labels) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) s += squared_distance(points, i, centers, labels(i));
  return s / static_cast<double>(points.rows());
}

IntVector assign_rows(const Matrix& points, const Matrix& centers) {
  IntVector labels(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    labels(i) = static_cast<int>(nearest_center(points, i, centers));
  return labels;
}

bool has_duplicate_centers(const Matrix& centers) {
  for (Eigen::Index i = 0; i < centers.rows(); ++i)
    for (Eigen::Index j = i + 1; j < centers.rows(); ++j)
      if (centers.row(i) == centers.row(j)) return true;
  return false;
}

}  // namespace

Eigen::Index nearest_center(const Matrix& points, Eigen::Index row, const Matrix& centers) {
  Eigen::Index best = 0;
  double best_d = squared_distance(points, row, centers, 0);
  for (Eigen::Index j = 1; j < centers.rows(); ++j) {
    const double d = squared_distance(points, row, centers, j);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

Projection project(const ConstRowRef& x, const Codebook& codebook) {
  if (x.size() != codebook.dim()) throw ShapeError("point and codebook dimensions differ");
  const Matrix point = x;
  Projection p;
  p.index = nearest_center(point, 0, codebook.centers);
  p.center = codebook.centers.row(p.index);
  return p;
}

IntVector assign(const Matrix& points, const Codebook& codebook) {
  if (points.cols() != codebook.dim()) throw ShapeError("point and codebook dimensions differ");
  return assign_rows(points, codebook.centers);
}

double empirical_risk(const Matrix& points, const Codebook& codebook) {
  if (points.rows() == 0) throw ShapeError("empirical risk of an empty sample");
  return risk_with_labels(points, codebook.centers, assign(points, codebook));
}

Eigen::Index count_distinct_rows(const Matrix& points) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(points.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  auto row_less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < points.cols(); ++c) {
      if (points(a, c) < points(b, c)) return true;
      if (points(b, c) < points(a, c)) return false;
    }
    return false;
  };
  std::sort(idx.begin(), idx.end(), row_less);
  Eigen::Index distinct = idx.empty() ? 0 : 1;
  for (std::size_t r = 1; r < idx.size(); ++r)
    if (row_less(idx[r - 1], idx[r])) ++distinct;
  return distinct;
}

Codebook kmeanspp_init(const Matrix& points, Eigen::Index k, Rng& rng) {
  const Eigen::Index n = points.rows();
  if (k < 1) throw InitError("k must be at least 1");
  if (count_distinct_rows(points) < k)
    throw InitError("fewer than " + std::to_string(k) + " distinct points");

  Codebook cb;
  cb.centers.resize(k, points.cols());
  const auto first = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(n)));
  cb.centers.row(0) = points.row(first);
  Vector d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2(i) = squared_distance(points, i, cb.centers, 0);

  for (Eigen::Index j = 1; j < k; ++j) {
    const double total = d2.sum();
    const double target = uniform01(rng) * total;
    Eigen::Index pick = -1;
    double cum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d2(i) <= 0.0) continue;
      cum += d2(i);
      pick = i;
      if (cum > target) break;
    }
    cb.centers.row(j) = points.row(pick);
    for (Eigen::Index i = 0; i < n; ++i)
      d2(i) = std::min(d2(i), squared_distance(points, i, cb.centers, j));
  }
  return cb;
}

Matrix update_centers(const Matrix& points, const Matrix& targets, const IntVector& labels,
                      Eigen::Index k, int* reseeded) {
  Matrix centers = Matrix::Zero(k, targets.cols());
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
  for (Eigen::Index i = 0; i < targets.rows(); ++i) {
    centers.row(labels(i)) += targets.row(i);
    ++counts[static_cast<std::size_t>(labels(i))];
  }
  std::vector<Eigen::Index> empty;
  for (Eigen::Index j = 0; j < k; ++j) {
    if (counts[static_cast<std::size_t>(j)] > 0)
      centers.row(j) /= static_cast<double>(counts[static_cast<std::size_t>(j)]);
    else
      empty.push_back(j);
  }
  if (reseeded) *reseeded = static_cast<int>(empty.size());
  if (empty.empty()) return centers;

  Vector dist(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    dist(i) = squared_distance(points, i, centers, labels(i));
  for (Eigen::Index j : empty) {
    Eigen::Index far = 0;
    dist.maxCoeff(&far);
    centers.row(j) = points.row(far);
    dist(far) = 0.0;
  }
  return centers;
}

FitResult lloyd(const Matrix& points, const Codebook& init, const LloydOptions& opts) {
  if (points.rows() == 0) throw ShapeError("Lloyd iteration on an empty sample");
  if (init.k() < 1 || init.dim() != points.cols())
    throw ShapeError("initial codebook does not match the points");
  const Eigen::Index k = init.k();

  FitResult res;
  Matrix centers = init.centers;
  IntVector labels = assign_rows(points, centers);
  double risk = risk_with_labels(points, centers, labels);
  res.risk_trace.push_back(risk);
  if (opts.record_centers) res.center_trace.push_back(centers);

  for (int it = 1; it <= opts.max_iter; ++it) {
    Matrix next = update_centers(points, points, labels, k);
    IntVector next_labels = assign_rows(points, next);
    const double next_risk = risk_with_labels(points, next, next_labels);
    res.iterations = it;
    res.risk_trace.push_back(next_risk);
    if (opts.record_centers) res.center_trace.push_back(next);

    const bool stable = next_labels == labels;
    const double decrease = risk - next_risk;
    centers = std::move(next);
    labels = std::move(next_labels);
    risk = next_risk;
    if (stable || decrease <= opts.tol * res.risk_trace[res.risk_trace.size() - 2]) {
      res.converged = true;
      break;
    }
  }
  res.codebook.centers = std::move(centers);
  res.assignments = std::move(labels);
  res.risk = risk;
  return res;
}

namespace {

FitResult plug_in_sorted(const Matrix& points, Eigen::Index k, std::uint64_t seed,
                         const PlugInOptions& opts) {
  FitResult best;
  bool have_best = false;
  for (int r = 0; r < opts.restarts; ++r) {
    auto rng = make_stream(seed, {0x6b6d7070ULL, static_cast<std::uint64_t>(r)});
    Codebook init = kmeanspp_init(points, k, rng);
    FitResult fit = lloyd(points, init, opts.lloyd);
    if (has_duplicate_centers(fit.codebook.centers)) {
      // One repair pass: move the later copy onto the farthest point.
      Matrix centers = fit.codebook.centers;
      Vector dist(points.rows());
      for (Eigen::Index i = 0; i < points.rows(); ++i)
        dist(i) = squared_distance(points, i, centers, fit.assignments(i));
      for (Eigen::Index a = 0; a < k; ++a) {
        for (Eigen::Index b = a + 1; b < k; ++b) {
          if (centers.row(a) != centers.row(b)) continue;
          Eigen::Index far = 0;
          dist.maxCoeff(&far);
          centers.row(b) = points.row(far);
          dist(far) = 0.0;
        }
      }
      fit = lloyd(points, Codebook{centers}, opts.lloyd);
      fit.degenerate = has_duplicate_centers(fit.codebook.centers);
    }
    if (!have_best || fit.risk < best.risk) {
      best = std::move(fit);
      have_best = true;
    }
  }
  best.restarts_used = opts.restarts;
  return best;
}

}  // namespace

FitResult plug_in_estimate(const Matrix& points, Eigen::Index k, std::uint64_t seed,
                           const PlugInOptions& opts) {
  if (opts.restarts < 1) throw ConfigError("restarts must be at least 1");
  // Seeding runs on the lexicographically sorted rows so the result does not
  // depend on the input row order.
  const Eigen::Index n = points.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < points.cols(); ++c) {
      if (points(a, c) < points(b, c)) return true;
      if (points(b, c) < points(a, c)) return false;
    }
    return false;
  });
  Matrix sorted(n, points.cols());
  for (Eigen::Index i = 0; i < n; ++i) sorted.row(i) = points.row(order[static_cast<std::size_t>(i)]);
  FitResult fit = plug_in_sorted(sorted, k, seed, opts);
  IntVector labels(n);
  for (Eigen::Index i = 0; i < n; ++i) labels(order[static_cast<std::size_t>(i)]) = fit.assignments(i);
  fit.assignments = std::move(labels);
  return fit;
}

FitResult plug_in_estimate(const CounterfactualMatrix& mu_hat, Eigen::Index k, std::uint64_t seed,
                           const PlugInOptions& opts) {
  return plug_in_estimate(mu_hat.values, k, seed, opts);
}

Codebook brute_force_codebook(const Matrix& points, Eigen::Index k) {
  const Eigen::Index n = points.rows();
  if (n > 12 || k > 3) throw ConfigError("brute-force codebook limited to n <= 12 and k <= 3");
  if (k < 1 || n < k) throw ConfigError("brute-force codebook needs 1 <= k <= n");

  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  std::vector<int> best_labels;
  double best = std::numeric_limits<double>::infinity();
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(k));
  Matrix sums(k, points.cols());
  const double total_sq = points.squaredNorm();

  while (true) {
    std::fill(counts.begin(), counts.end(), 0);
    sums.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
      sums.row(labels[static_cast<std::size_t>(i)]) += points.row(i);
    }
    if (std::all_of(counts.begin(), counts.end(), [](Eigen::Index c) { return c > 0; })) {
      double within = total_sq;
      for (Eigen::Index j = 0; j < k; ++j)
        within -= sums.row(j).squaredNorm() / static_cast<double>(counts[static_cast<std::size_t>(j)]);
      if (within < best) {
        best = within;
        best_labels = labels;
      }
    }
    // Next label vector in base k.
    std::size_t pos = 0;
    while (pos < labels.size() && ++labels[pos] == k) labels[pos++] = 0;
    if (pos == labels.size()) break;
  }

  IntVector lab = Eigen::Map<const IntVector>(best_labels.data(), n);
  return Codebook{update_centers(points, points, lab, k)};
}

}  // namespace causalkm
