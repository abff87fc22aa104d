#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace detkit::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kDataError = 2,
  kInternal = 3,
};

// Entry point of the `detkit` binary. Structured output goes to `out` (or
// the --out path), diagnostics to `err`.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace detkit::cli
