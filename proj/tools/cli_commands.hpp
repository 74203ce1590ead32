#pragma once

#include <ostream>
#include <string>

#include "cli_config.hpp"

namespace seasonal_spline::cli {

enum ExitCode : int { Ok = 0, ConfigError = 2, NumericError = 3 };

/// Each command writes its artifacts under cfg.out_dir and returns an exit code.
/// Exceptions propagate; run_command maps them to codes.
int cmd_fit(const RunConfig& cfg, std::ostream& log);
int cmd_quadratic(const RunConfig& cfg, std::ostream& log);
int cmd_converge(const RunConfig& cfg, std::ostream& log);
int cmd_simulate(const RunConfig& cfg, std::ostream& log);

/// 2 for configuration and validation failures, 3 for numerical ones.
int exit_code_for(const std::exception& e);

/// Dispatches on verb ("fit", "quadratic", "converge", "simulate") and reports
/// errors on `err`.
int run_command(const std::string& verb, const RunConfig& cfg, std::ostream& log, std::ostream& err);

} // namespace seasonal_spline::cli
