#include "causalkm/report.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "causalkm/errors.hpp"

namespace causalkm {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_centers_csv(std::ostream& out, const Codebook& codebook) {
  out << "cluster";
  for (Eigen::Index a = 0; a < codebook.dim(); ++a) out << ",mu" << a + 1;
  out << '\n';
  for (Eigen::Index j = 0; j < codebook.k(); ++j) {
    out << j + 1;
    for (Eigen::Index a = 0; a < codebook.dim(); ++a) out << ',' << format_double(codebook.centers(j, a));
    out << '\n';
  }
}

void write_assignments_csv(std::ostream& out, const IntVector& assignments) {
  out << "unit,cluster\n";
  for (Eigen::Index i = 0; i < assignments.size(); ++i) out << i + 1 << ',' << assignments(i) + 1 << '\n';
}

void write_risk_trace_csv(std::ostream& out, const FitResult& fit) {
  out << "iteration,risk\n";
  for (std::size_t t = 0; t < fit.risk_trace.size(); ++t)
    out << t << ',' << format_double(fit.risk_trace[t]) << '\n';
}

void write_study_raw_csv(std::ostream& out, const StudyResult& study) {
  out << "n,estimator,rep,excess_risk,per_center_l1,moment_residual,failed\n";
  for (const auto& r : study.rows) {
    out << r.n << ',' << to_string(r.estimator) << ',' << r.rep + 1 << ','
        << format_double(r.result.excess_risk) << ',' << format_double(r.result.per_center_l1) << ','
        << format_double(r.result.moment_residual) << ',' << (r.result.failed ? 1 : 0) << '\n';
  }
}

void write_study_summary_csv(std::ostream& out, const StudyResult& study) {
  out << "n,estimator,median_excess_risk,median_per_center_l1,failed,excess_risk_slope,"
         "per_center_l1_slope\n";
  for (const auto& s : study.summary) {
    double slope_excess = std::nan(""), slope_l1 = std::nan("");
    for (const auto& sl : study.slopes) {
      if (sl.estimator == s.estimator) {
        slope_excess = sl.excess_risk_slope;
        slope_l1 = sl.per_center_l1_slope;
      }
    }
    out << s.n << ',' << to_string(s.estimator) << ',' << format_double(s.median_excess_risk) << ','
        << format_double(s.median_per_center_l1) << ',' << s.failed << ','
        << format_double(slope_excess) << ',' << format_double(slope_l1) << '\n';
  }
}

void write_elbow_csv(std::ostream& out, const ElbowTable& table) {
  out << "k,wcss,relative_gain\n";
  for (const auto& row : table) {
    out << row.k << ',' << format_double(row.wcss) << ',';
    if (row.relative_gain) out << format_double(*row.relative_gain);
    out << '\n';
  }
}

void write_profile_covariates_csv(std::ostream& out, const ClusterProfile& profile) {
  out << "cluster,size,cov,zmean\n";
  for (std::size_t j = 0; j < profile.clusters.size(); ++j) {
    const auto& c = profile.clusters[j];
    if (c.zmeans.empty()) {
      out << j + 1 << ',' << c.size << ",,\n";
      continue;
    }
    for (std::size_t v = 0; v < c.zmeans.size(); ++v)
      out << j + 1 << ',' << c.size << ",x" << v + 1 << ',' << format_double(c.zmeans[v]) << '\n';
  }
}

void write_profile_cates_csv(std::ostream& out, const ClusterProfile& profile) {
  out << "cluster,pair,cate_mean,cate_sd\n";
  for (std::size_t j = 0; j < profile.clusters.size(); ++j) {
    for (const auto& c : profile.clusters[j].cates)
      out << j + 1 << ",tau" << c.arm << c.baseline << ',' << format_double(c.mean) << ','
          << format_double(c.sd) << '\n';
  }
}

Codebook read_centers_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("centers file is empty");
  std::vector<std::vector<double>> rows;
  long row = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++row;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> values;
    bool first = true;
    while (std::getline(ss, cell, ',')) {
      if (first) {
        first = false;
        continue;
      }
      try {
        std::size_t used = 0;
        values.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw DataError("non-numeric center coordinate at row " + std::to_string(row));
      }
    }
    if (values.empty() || (!rows.empty() && values.size() != rows.front().size()))
      throw DataError("malformed centers row " + std::to_string(row));
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw DataError("centers file has no rows");
  Codebook cb;
  cb.centers.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t j = 0; j < rows.size(); ++j)
    for (std::size_t a = 0; a < rows[j].size(); ++a)
      cb.centers(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(a)) = rows[j][a];
  return cb;
}

}  // namespace causalkm
