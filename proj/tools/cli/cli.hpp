#pragma once

#include <string>
#include <vector>

namespace neuroflag::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDiverged = 3;

/// Runs one command line (args[0] is the program name) and returns its exit code.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

}  // namespace neuroflag::cli
