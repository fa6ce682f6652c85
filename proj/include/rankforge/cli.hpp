#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rankforge {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitBind = 4;

/// Runs `rankforge <fit|rank|serve> ...`. `args` excludes the program name.
/// Standard output receives results only on success; diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rankforge
