#pragma once

// Command-line front end: gen, train, embed, analyze, sarkar.

#include <iosfwd>
#include <string>
#include <vector>

namespace wlhn::cli {

enum ExitCode { kOk = 0, kUsage = 1, kRuntime = 2 };

/// Runs one command. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace wlhn::cli
