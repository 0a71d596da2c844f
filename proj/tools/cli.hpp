#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace chiext::cli {

enum ExitCode : int { kSuccess = 0, kConfigFailure = 2, kNumericFailure = 3 };

/// Runs one command line (args excludes the program name). The CSV goes to
/// --out (and its sidecar next to it) or to `out` when no path is given;
/// failures are reported on `err` as a single JSON line.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace chiext::cli
