#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace deepcso {

/// Exit codes of the command-line tool.
enum ExitCode : int { exit_ok = 0, exit_domain_error = 1, exit_usage_error = 2 };

/// Runs one command line (args[0] is the program name). Output goes to
/// `out`, diagnostics to `err`; returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace deepcso
