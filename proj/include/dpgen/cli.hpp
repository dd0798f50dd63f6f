#pragma once

#include <string>
#include <vector>

namespace dpgen::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_usage = 2;
inline constexpr int exit_io = 3;
inline constexpr int exit_numeric = 4;

// Runs one `dpgen` invocation. args[0] is the program name.
// Errors go to stderr as a single line "dpgen: error[<kind>]: <reason>".
int run(const std::vector<std::string>& args);

}  // namespace dpgen::cli
