#pragma once

#include <iosfwd>

namespace hygro::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kNumerical = 3 };

/// Entry point of the `hygrohom` tool. Subcommands: mesh, solve, homogenize, sweep,
/// identify. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hygro::cli
