#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace actdist::cli {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kSuccess = 0, kIoFailure = 1, kValidationFailure = 2 };

/// Runs the command line `args` (without the program name). Messages go to
/// `out` and `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace actdist::cli
