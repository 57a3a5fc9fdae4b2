#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pcma {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 2;
inline constexpr int kExitNotConverged = 3;

/// Entry point of the `pcma` tool; `args` excludes the program name.
/// Subcommands: fit, simulate, report.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pcma
