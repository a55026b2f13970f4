#pragma once

#include <iosfwd>

#include "run_config.hpp"

namespace causalkm::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kDataError = 3, kFitError = 4 };

int cmd_fit(const RunConfig& cfg, std::ostream& log);
int cmd_simulate(const RunConfig& cfg, std::ostream& log);
int cmd_diagnose(const RunConfig& cfg, std::ostream& log);

/// Parses the command line, runs the selected subcommand and maps errors to
/// exit codes. Messages go to `err`, progress notes to `log`.
int run_cli(int argc, const char* const* argv, std::ostream& log, std::ostream& err);

}  // namespace causalkm::cli
