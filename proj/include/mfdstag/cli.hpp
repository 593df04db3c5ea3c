#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mfdstag {

// Exit codes of the command-line driver.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;     // bad arguments or configuration
inline constexpr int kExitFailure = 2;   // mesh, assembly, solver or domain failure
inline constexpr int kExitCheck = 3;     // rate floor missed or invariant violated

// args excludes the program name. Errors are reported on err as a single
// line "error: <code>: <message>".
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mfdstag
