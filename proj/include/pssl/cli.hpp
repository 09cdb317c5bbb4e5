#pragma once

#include <string>
#include <vector>

namespace pssl::cli {

// Exit codes: 0 success, 2 usage error (bad flags, malformed config or
// unreadable input files), 3 runtime failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

// Runs one subcommand (decompose | train | eval | report | synth). `args`
// excludes the program name. Errors print a single machine-parseable line
// "error: ..." to stderr.
int run_command(const std::vector<std::string>& args);

}  // namespace pssl::cli
