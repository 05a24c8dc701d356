#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace dtcrs::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kTransport = 2,
  kData = 3,
};

/// Runs the command line `args` (program name excluded). Results and tables
/// go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dtcrs::cli
