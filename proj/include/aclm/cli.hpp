#pragma once

#include <string>
#include <vector>

namespace aclm::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Full command-line entry point, minus the program name. Parses, runs, and
/// reports errors as one JSON line on stderr. Returns the process exit code:
/// 0 on success, 2 for argument errors, 1 for everything else.
int run(const std::vector<std::string>& args);

}  // namespace aclm::cli
