#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace causalkm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;
/// Row views that accept rows of column-major matrices without copying.
using RowRef = Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;
using ConstRowRef = Eigen::Ref<const Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;

/// One observation Z = (Y, A, X). Arms are 1-based.
struct ObservedUnit {
  double y = 0.0;
  int arm = 1;
  std::vector<double> x;
};

enum class ArmCoverage {
  required,  // every arm 1..p must be observed
  optional,
};

/// Validated sample of n units with p arms and d covariates, stored
/// column-wise. Immutable after construction.
class Dataset {
 public:
  Dataset(Vector y, IntVector arms, Matrix x, int p, ArmCoverage coverage = ArmCoverage::required);

  static Dataset from_units(std::span<const ObservedUnit> units, int p,
                            ArmCoverage coverage = ArmCoverage::required);

  Eigen::Index n() const { return y_.size(); }
  int p() const { return p_; }
  Eigen::Index d() const { return x_.cols(); }

  const Vector& y() const { return y_; }
  const IntVector& arms() const { return arms_; }
  const Matrix& x() const { return x_; }

  ObservedUnit unit(Eigen::Index i) const;
  Eigen::Index arm_count(int arm) const;

 private:
  Vector y_;
  IntVector arms_;
  Matrix x_;
  int p_;
};

/// Reads `y,a,x1,...,xd` CSV. Rows are numbered from 1 (first data row) in
/// error messages.
/// Reads a y,a,x1..xd CSV. With p <= 0 the arm count is the largest arm seen.
Dataset load_dataset(const std::filesystem::path& path, int p);
Dataset parse_dataset(std::istream& in, int p);

struct FoldAssignment {
  std::vector<int> labels;  // 1..K
  int K = 0;
  std::uint64_t seed = 0;

  Eigen::Index fold_size(int b) const;
};

/// Balanced random split: a label vector 1,2,...,K,1,2,... is shuffled with a
/// generator derived from `seed`. Requires 2 <= K <= n.
FoldAssignment assign_folds(Eigen::Index n, int K, std::uint64_t seed);

enum class Parametrization { levels, contrasts_vs_baseline };

/// n x p matrix of conditional counterfactual means (or a reparametrization).
struct CounterfactualMatrix {
  Matrix values;
  Parametrization parametrization = Parametrization::levels;
};

/// levels -> contrasts maps (m1, ..., mp) to (m1, m2 - m1, ..., mp - m1).
/// Requesting levels undoes a contrast parametrization (identity on levels).
CounterfactualMatrix reparametrize(const CounterfactualMatrix& m, Parametrization mode);

const char* to_string(Parametrization p);
Parametrization parse_parametrization(std::string_view name);

}  // namespace causalkm
