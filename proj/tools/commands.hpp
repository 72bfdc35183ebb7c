#pragma once

namespace robandit::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfigError = 1,
  kExitRuntimeFailure = 2,
  kExitInsufficientData = 3,
};

/// Parses arguments and runs one subcommand; returns the process exit code.
int run(int argc, char** argv);

}  // namespace robandit::cli
