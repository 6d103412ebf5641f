#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace fpscan {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2 };

/// Runs the command line `args` (args[0] is the program name). Data goes to
/// `out` unless --out names a file; warnings and the config digest go to
/// `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fpscan
