// Command-line entry point: reweight, verify, train and bench.

#ifndef RESRL_TOOLS_CLI_HPP_
#define RESRL_TOOLS_CLI_HPP_

#include <iosfwd>

namespace resrl::cli {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kUsage = 2 };

/// Parses argv and runs one subcommand. Diagnostics go to err.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace resrl::cli

#endif  // RESRL_TOOLS_CLI_HPP_
