#pragma once

#include <iosfwd>
#include <string>

#include "causalkm/diagnostics.hpp"
#include "causalkm/simulation.hpp"

namespace causalkm {

/// Shortest round-trip form: 17 significant digits, so reruns are
/// byte-identical and values parse back exactly.
std::string format_double(double v);

// Every writer emits a header row and terminates each line with '\n'.
// Cluster labels are written 1-based.

void write_centers_csv(std::ostream& out, const Codebook& codebook);
void write_assignments_csv(std::ostream& out, const IntVector& assignments);
void write_risk_trace_csv(std::ostream& out, const FitResult& fit);

void write_study_raw_csv(std::ostream& out, const StudyResult& study);
void write_study_summary_csv(std::ostream& out, const StudyResult& study);

void write_elbow_csv(std::ostream& out, const ElbowTable& table);
void write_profile_covariates_csv(std::ostream& out, const ClusterProfile& profile);
void write_profile_cates_csv(std::ostream& out, const ClusterProfile& profile);

/// Reads a centers file written by write_centers_csv.
Codebook read_centers_csv(std::istream& in);

}  // namespace causalkm
