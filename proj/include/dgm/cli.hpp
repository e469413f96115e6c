#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dgm {

/// Exit codes: 0 success, 1 audit failure, 2 input error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitAuditFailure = 1;
inline constexpr int kExitInputError = 2;

/// Runs one subcommand. args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dgm
