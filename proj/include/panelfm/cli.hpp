#pragma once

#include <iosfwd>

namespace panelfm {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitNotConverged = 3,
  kExitAscentViolation = 4,
};

// Entry point of the `panelfm` command line tool: simulate, fit, predict,
// effects, evaluate. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace panelfm
