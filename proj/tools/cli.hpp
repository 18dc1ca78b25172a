#ifndef CAMREID_TOOLS_CLI_HPP_
#define CAMREID_TOOLS_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace camreid::cli {

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitInputError = 2;

/// Runs `camreid <subcommand> [flags]`. `args` excludes the program name.
/// Regular output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace camreid::cli

#endif  // CAMREID_TOOLS_CLI_HPP_
