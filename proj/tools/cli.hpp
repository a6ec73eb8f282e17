#pragma once

#include <string>
#include <vector>

namespace qgcl::cli {

// Exit codes: 0 success, 1 runtime failure, 2 usage error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// args[0] is the program name.
int run(const std::vector<std::string>& args);

}  // namespace qgcl::cli
