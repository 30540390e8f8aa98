#pragma once

// The `ida` command line. Exit codes: 0 success, 1 domain error, 2 usage error.

#include <ostream>
#include <string>
#include <vector>

namespace ida::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitUsage = 2;

// args[0] is the program name.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ida::cli
