#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace fdx::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFailure = 2;

inline constexpr const char* kToolVersion = "0.1.0";

// Parses args (without the program name), runs one subcommand and returns
// the exit code. Usage errors go to err; operation errors print the error
// code name to err.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace fdx::cli
