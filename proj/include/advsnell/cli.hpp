#pragma once

#include <string>
#include <vector>

namespace advsnell::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitViolation = 2;

/// Runs one subcommand; `args` excludes the program name. Reports go to the
/// --out directory, diagnostics to standard error.
int run(const std::vector<std::string>& args);

} // namespace advsnell::cli
