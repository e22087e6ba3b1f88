#pragma once

#include <string>
#include <vector>

namespace graphuil::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kUsage = 1, kRuntime = 2 };

/// Entry point shared by the executable and in-process callers. args[0] is
/// the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace graphuil::cli
