#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fastsinkhorn {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,     // bad flags, unreadable or invalid input
  kExitAbnormal = 2,  // a run hit a non-finite scaling
};

/// Entry point behind the `fastsinkhorn` binary. `args` excludes the program
/// name. Human-readable summaries go to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fastsinkhorn
