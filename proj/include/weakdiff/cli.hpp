#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace weakdiff {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// Runs the command line `args` (without the program name). Never throws;
// diagnostics go to `err`, progress to `out`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace weakdiff
