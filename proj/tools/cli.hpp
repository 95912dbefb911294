#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ccmt::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;  // bad flags, config or input contents
inline constexpr int kExitIo = 2;          // unreadable/unwritable or malformed files
inline constexpr int kExitFailure = 3;     // divergence or failed gradient check

// Runs one command line (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ccmt::cli
