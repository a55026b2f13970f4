#include "causalkm/eif.hpp"

#include <cmath>
#include <string>

#include "causalkm/errors.hpp"

namespace causalkm {

double phi_C_score(const ConstRowRef& phi1_row,
                   const ConstRowRef& phi2_row,
                   const ConstRowRef& mu_hat_row, const Codebook& codebook) {
  if (phi1_row.size() != codebook.dim() || phi2_row.size() != codebook.dim())
    throw ShapeError("score and codebook dimensions differ");
  const auto c = project(mu_hat_row, codebook).center;
  double s = 0.0;
  for (Eigen::Index a = 0; a < c.size(); ++a)
    s += phi2_row(a) - 2.0 * phi1_row(a) * c(a) + c(a) * c(a);
  return s;
}

SemiObjective::SemiObjective(const CrossFitScores& scores, Eigen::Index k) : scores_(&scores), k_(k) {
  if (k < 1) throw ConfigError("k must be at least 1");
}

Vector SemiObjective::unit_scores(const Codebook& codebook) const {
  const auto& s = *scores_;
  if (codebook.dim() != s.p()) throw ShapeError("codebook dimension differs from the scores");
  Vector out(s.n());
  for (Eigen::Index i = 0; i < s.n(); ++i) {
    const Eigen::Index j = nearest_center(s.mu_hat, i, codebook.centers);
    double v = 0.0;
    for (Eigen::Index a = 0; a < s.p(); ++a) {
      const double c = codebook.centers(j, a);
      v += s.phi2(i, a) - 2.0 * s.phi1(i, a) * c + c * c;
    }
    out(i) = v;
  }
  return out;
}

double SemiObjective::risk(const Codebook& codebook) const {
  if (scores_->n() == 0) throw OptimizationError("no units to evaluate");
  return unit_scores(codebook).mean();
}

GradientBlock SemiObjective::gradient(const Codebook& codebook) const {
  const auto& s = *scores_;
  if (codebook.dim() != s.p()) throw ShapeError("codebook dimension differs from the scores");
  GradientBlock g;
  g.blocks = Matrix::Zero(codebook.k(), s.p());
  g.active_counts = IntVector::Zero(codebook.k());
  for (Eigen::Index i = 0; i < s.n(); ++i) {
    const Eigen::Index j = nearest_center(s.mu_hat, i, codebook.centers);
    g.blocks.row(j) += codebook.centers.row(j) - s.phi1.row(i);
    ++g.active_counts(j);
  }
  g.blocks *= 2.0 / static_cast<double>(s.n());
  return g;
}

double risk_hat(const CrossFitScores& scores, const Codebook& codebook) {
  return SemiObjective(scores, codebook.k()).risk(codebook);
}

GradientBlock gradient(const CrossFitScores& scores, const Codebook& codebook) {
  return SemiObjective(scores, codebook.k()).gradient(codebook);
}

DerivativeMatrix derivative_matrix(const Matrix& mu_hat, const Codebook& codebook) {
  if (mu_hat.rows() == 0) throw ShapeError("derivative matrix of an empty sample");
  const IntVector labels = assign(mu_hat, codebook);
  DerivativeMatrix m;
  m.proportions = Vector::Zero(codebook.k());
  for (Eigen::Index i = 0; i < labels.size(); ++i) m.proportions(labels(i)) += 1.0;
  m.proportions /= static_cast<double>(mu_hat.rows());
  m.diagonal.resize(codebook.k() * codebook.dim());
  for (Eigen::Index j = 0; j < codebook.k(); ++j) {
    m.diagonal.segment(j * codebook.dim(), codebook.dim()).setConstant(2.0 * m.proportions(j));
    if (m.proportions(j) == 0.0) m.singular = true;
  }
  return m;
}

const char* to_string(SemiMethod m) {
  switch (m) {
    case SemiMethod::gradient_descent: return "gradient_descent";
    case SemiMethod::generalized_lloyd: return "generalized_lloyd";
    case SemiMethod::newton: return "newton";
  }
  return "unknown";
}

SemiMethod parse_semi_method(std::string_view name) {
  if (name == "gradient_descent") return SemiMethod::gradient_descent;
  if (name == "generalized_lloyd") return SemiMethod::generalized_lloyd;
  if (name == "newton") return SemiMethod::newton;
  throw ConfigError("unknown optimization method '" + std::string(name) + "'");
}

namespace {

struct Iterate {
  Matrix centers;
  double risk = 0.0;
};

class Tracker {
 public:
  Tracker(FitResult& res, bool record) : res_(res), record_(record) {}

  void visit(const Matrix& centers, double risk) {
    res_.risk_trace.push_back(risk);
    if (record_) res_.center_trace.push_back(centers);
    if (!have_ || risk < best_.risk) {
      best_ = Iterate{centers, risk};
      have_ = true;
    }
  }
  const Iterate& best() const { return best_; }

 private:
  FitResult& res_;
  bool record_;
  Iterate best_;
  bool have_ = false;
};

double diameter(const Matrix& points) {
  const Eigen::RowVectorXd span = points.colwise().maxCoeff() - points.colwise().minCoeff();
  return span.norm();
}

void generalized_lloyd(const SemiObjective& obj, const Matrix& init, const SemiOptions& opts,
                       FitResult& res, Tracker& track) {
  const auto& s = obj.scores();
  Matrix centers = init;
  IntVector labels = assign(s.mu_hat, Codebook{centers});
  track.visit(centers, obj.risk(Codebook{centers}));
  bool fixed_point = false;
  for (int round = 1; round <= opts.max_rounds; ++round) {
    Matrix next = update_centers(s.mu_hat, s.phi1, labels, obj.k());
    IntVector next_labels = assign(s.mu_hat, Codebook{next});
    track.visit(next, obj.risk(Codebook{next}));
    res.iterations = round;
    const bool stable = next_labels == labels;
    centers = std::move(next);
    labels = std::move(next_labels);
    if (stable) {
      fixed_point = true;
      break;
    }
  }
  res.converged = fixed_point;
}

void gradient_descent(const SemiObjective& obj, const Matrix& init, const SemiOptions& opts,
                      FitResult& res, Tracker& track) {
  double step = opts.initial_step > 0.0 ? opts.initial_step : 0.1 * diameter(obj.scores().mu_hat);
  if (!(step > 0.0)) step = 1.0;
  Codebook current{init};
  double risk = obj.risk(current);
  track.visit(current.centers, risk);
  for (int it = 1; it <= opts.max_steps; ++it) {
    const GradientBlock g = obj.gradient(current);
    if (g.max_abs() < opts.tol) {
      res.converged = true;
      break;
    }
    bool accepted = false;
    for (int halving = 0; halving < 60; ++halving) {
      Codebook trial{current.centers - step * g.blocks};
      const double r = obj.risk(trial);
      if (r <= risk) {
        current = std::move(trial);
        risk = r;
        accepted = true;
        break;
      }
      step *= opts.backtrack;
    }
    if (!accepted) break;
    res.iterations = it;
    track.visit(current.centers, risk);
  }
  if (!res.converged) res.converged = obj.gradient(current).max_abs() < opts.tol;
}

void newton(const SemiObjective& obj, const Matrix& init, const SemiOptions& opts, FitResult& res,
            Tracker& track) {
  const auto& s = obj.scores();
  Codebook current{init};
  double risk = obj.risk(current);
  track.visit(current.centers, risk);
  for (int it = 1; it <= opts.max_rounds; ++it) {
    const GradientBlock g = obj.gradient(current);
    if (g.max_abs() < opts.tol) {
      res.converged = true;
      break;
    }
    const DerivativeMatrix m = derivative_matrix(s.mu_hat, current);
    Matrix direction = Matrix::Zero(g.blocks.rows(), g.blocks.cols());
    for (Eigen::Index j = 0; j < direction.rows(); ++j)
      if (m.proportions(j) > 0.0) direction.row(j) = g.blocks.row(j) / (2.0 * m.proportions(j));

    bool accepted = false;
    double t = 1.0;
    for (int halving = 0; halving < 40; ++halving, t *= opts.backtrack) {
      Codebook trial{current.centers - t * direction};
      const double r = obj.risk(trial);
      if (r <= risk) {
        current = std::move(trial);
        risk = r;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    res.iterations = it;
    track.visit(current.centers, risk);
  }
  if (!res.converged) res.converged = obj.gradient(current).max_abs() < opts.tol;
}

}  // namespace

FitResult minimize_semiparametric(const CrossFitScores& scores, Eigen::Index k,
                                  const Codebook& init, SemiMethod method,
                                  const SemiOptions& opts) {
  if (scores.n() == 0) throw OptimizationError("no units: every cell is empty");
  if (init.k() != k) throw ShapeError("initial codebook has the wrong number of centers");
  if (init.dim() != scores.p()) throw ShapeError("initial codebook dimension differs from the scores");
  if (!init.centers.allFinite()) throw OptimizationError("initial codebook is not finite");

  const SemiObjective obj(scores, k);
  FitResult res;
  Tracker track(res, opts.record_centers);
  switch (method) {
    case SemiMethod::generalized_lloyd: generalized_lloyd(obj, init.centers, opts, res, track); break;
    case SemiMethod::gradient_descent: gradient_descent(obj, init.centers, opts, res, track); break;
    case SemiMethod::newton: newton(obj, init.centers, opts, res, track); break;
  }

  res.codebook = Codebook{track.best().centers};
  res.risk = track.best().risk;
  res.assignments = assign(scores.mu_hat, res.codebook);
  res.moment_residual = obj.gradient(res.codebook).max_abs();
  // The returned iterate must itself satisfy the moment condition.
  res.converged = res.converged && res.moment_residual < opts.tol;
  res.restarts_used = 1;
  return res;
}

}  // namespace causalkm
