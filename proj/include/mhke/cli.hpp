#pragma once

#include <string>
#include <vector>

namespace mhke {

/// Exit codes shared by all subcommands.
enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 2,   // unusable flags, config file, or input paths
    kExitBackend = 3,  // backend unreachable / failed
    kExitAborted = 4,  // a solve aborted on unparseable model output
};

/// Full command-line driver (solve / eval / build-library). Kept callable
/// in-process so tests can exercise flags and exit codes directly.
int run_cli(const std::vector<std::string>& args);

int run_cli(int argc, const char* const* argv);

}  // namespace mhke
