#pragma once

namespace dpost::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitDivergence = 4,
};

// gen-data, run, eval, bench and report. Returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace dpost::cli
