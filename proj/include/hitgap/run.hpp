#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hitgap/config.hpp"
#include "hitgap/report.hpp"

namespace hitgap {

/// Exit statuses of the command-line tool.
enum ExitStatus : int { kExitPass = 0, kExitCheckFailure = 1, kExitUsage = 2, kExitInternal = 3 };

/// Targeted command-line overrides applied on top of the config file.
struct Overrides {
  std::optional<double> alpha;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

const std::vector<std::string>& command_names();

/// Result of one subcommand before emission. `status` follows ExitStatus.
struct CommandResult {
  RunReport report;
  std::vector<std::pair<std::string, std::string>> extra_csv;  ///< (file suffix, body)
  int status = kExitPass;
};

/// Runs one subcommand. Module errors are recorded per item; ConfigError
/// propagates for problems that prevent any computation.
CommandResult run_command(const std::string& command, ExperimentConfig config, const Overrides& overrides);

/// run_command followed by emit_report; returns the exit status.
int run_and_emit(const std::string& command, const ExperimentConfig& config, const Overrides& overrides,
                 std::ostream& out, std::ostream& err);

}  // namespace hitgap
