#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace compactml::cli {

// Stable exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitAllFailed = 3;

// Entry point behind the compactml binary. args excludes argv[0].
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace compactml::cli
