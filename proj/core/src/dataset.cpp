#include "causalkm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "causalkm/errors.hpp"
#include "causalkm/random.hpp"

namespace causalkm {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace

Dataset::Dataset(Vector y, IntVector arms, Matrix x, int p, ArmCoverage coverage)
    : y_(std::move(y)), arms_(std::move(arms)), x_(std::move(x)), p_(p) {
  if (p_ < 2) throw DataError("number of arms must be at least 2");
  if (x_.cols() < 1) throw DataError("at least one covariate is required");
  if (arms_.size() != y_.size() || x_.rows() != y_.size())
    throw DataError("outcome, arm and covariate row counts differ");
  for (Eigen::Index i = 0; i < n(); ++i) {
    if (arms_(i) < 1 || arms_(i) > p_)
      throw DataError("arm out of range at row " + std::to_string(i + 1));
    if (!std::isfinite(y_(i)) || !x_.row(i).allFinite())
      throw DataError("non-finite value at row " + std::to_string(i + 1));
  }
  if (coverage == ArmCoverage::required) {
    for (int a = 1; a <= p_; ++a)
      if (arm_count(a) == 0) throw DataError("arm " + std::to_string(a) + " unobserved");
  }
}

Dataset Dataset::from_units(std::span<const ObservedUnit> units, int p, ArmCoverage coverage) {
  const auto n = static_cast<Eigen::Index>(units.size());
  const auto d = n > 0 ? static_cast<Eigen::Index>(units.front().x.size()) : 0;
  Vector y(n);
  IntVector a(n);
  Matrix x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& u = units[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(u.x.size()) != d)
      throw DataError("covariate dimension mismatch at row " + std::to_string(i + 1));
    y(i) = u.y;
    a(i) = u.arm;
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = u.x[static_cast<std::size_t>(j)];
  }
  return Dataset(std::move(y), std::move(a), std::move(x), p, coverage);
}

ObservedUnit Dataset::unit(Eigen::Index i) const {
  ObservedUnit u;
  u.y = y_(i);
  u.arm = arms_(i);
  u.x.resize(static_cast<std::size_t>(d()));
  for (Eigen::Index j = 0; j < d(); ++j) u.x[static_cast<std::size_t>(j)] = x_(i, j);
  return u;
}

Eigen::Index Dataset::arm_count(int arm) const { return (arms_.array() == arm).count(); }

Dataset parse_dataset(std::istream& in, int p) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty input: missing header row");
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "y" || header[1] != "a")
    throw DataError("header must be y,a,x1,...,xd");
  for (std::size_t j = 2; j < header.size(); ++j) {
    if (header[j] != "x" + std::to_string(j - 1))
      throw DataError("unexpected header column '" + header[j] + "', expected x" +
                      std::to_string(j - 1));
  }
  const std::size_t d = header.size() - 2;

  std::vector<ObservedUnit> units;
  long row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw DataError("row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                      " cells, expected " + std::to_string(header.size()));
    ObservedUnit u;
    if (!parse_double(cells[0], u.y))
      throw DataError("non-numeric value at row " + std::to_string(row) + ", column y");
    double arm = 0.0;
    if (!parse_double(cells[1], arm) || arm != std::floor(arm) || std::abs(arm) > 1e9)
      throw DataError("non-integer arm at row " + std::to_string(row) + ", column a");
    u.arm = static_cast<int>(arm);
    if (u.arm < 1 || (p > 0 && u.arm > p))
      throw DataError("arm out of range at row " + std::to_string(row));
    u.x.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
      if (!parse_double(cells[j + 2], u.x[j]))
        throw DataError("non-numeric value at row " + std::to_string(row) + ", column " +
                        header[j + 2]);
    }
    units.push_back(std::move(u));
  }
  if (units.empty()) throw DataError("no data rows");
  if (p <= 0) {
    for (const auto& u : units) p = std::max(p, u.arm);
    if (p < 2) throw DataError("at least two arms required");
  }
  return Dataset::from_units(units, p);
}

Dataset load_dataset(const std::filesystem::path& path, int p) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_dataset(in, p);
}

Eigen::Index FoldAssignment::fold_size(int b) const {
  return std::count(labels.begin(), labels.end(), b);
}

FoldAssignment assign_folds(Eigen::Index n, int K, std::uint64_t seed) {
  if (K < 2) throw ConfigError("number of folds must be at least 2");
  if (K > n) throw ConfigError("number of folds exceeds sample size");
  FoldAssignment folds;
  folds.K = K;
  folds.seed = seed;
  folds.labels.resize(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < folds.labels.size(); ++i)
    folds.labels[i] = static_cast<int>(i % static_cast<std::size_t>(K)) + 1;
  auto rng = make_stream(seed, {0x666f6c64ULL});
  // Fisher-Yates with an explicit index draw keeps the permutation stable
  // across standard library implementations of std::shuffle.
  for (std::size_t i = folds.labels.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(folds.labels[i - 1], folds.labels[j]);
  }
  return folds;
}

CounterfactualMatrix reparametrize(const CounterfactualMatrix& m, Parametrization mode) {
  if (mode == Parametrization::contrasts_vs_baseline) {
    if (m.parametrization == Parametrization::contrasts_vs_baseline)
      throw StateError("matrix is already in contrast parametrization");
    CounterfactualMatrix out{m.values, Parametrization::contrasts_vs_baseline};
    for (Eigen::Index j = 1; j < out.values.cols(); ++j)
      out.values.col(j) -= m.values.col(0);
    return out;
  }
  if (m.parametrization == Parametrization::levels) return m;
  CounterfactualMatrix out{m.values, Parametrization::levels};
  for (Eigen::Index j = 1; j < out.values.cols(); ++j) out.values.col(j) += m.values.col(0);
  return out;
}

const char* to_string(Parametrization p) {
  return p == Parametrization::levels ? "levels" : "contrasts";
}

Parametrization parse_parametrization(std::string_view name) {
  if (name == "levels") return Parametrization::levels;
  if (name == "contrasts" || name == "contrasts_vs_baseline")
    return Parametrization::contrasts_vs_baseline;
  throw ConfigError("unknown parametrization '" + std::string(name) + "'");
}

}  // namespace causalkm
