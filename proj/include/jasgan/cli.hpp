#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace jasgan::cli {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;

/// Runs one subcommand. `args` excludes the program name. Results go to `out` as JSON; failures
/// go to `err` as a one-line JSON error record, and the return value is the exit code.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace jasgan::cli
