#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rkshap::cli {

enum ExitCode : int {
  kSuccess = 0,
  kFailure = 1,
  kInputError = 2,
  kNumericError = 3,
  kTimeout = 4,
};

// Runs one command line (args[0] is the program name) and returns the exit
// code. Reports go to files; `out` gets short status lines, `err` diagnostics.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rkshap::cli
