#pragma once

#include <string>
#include <utility>
#include <vector>

namespace CLI {
class App;
}

namespace neuroflag::cli {

/// Flat `key = value` lines; `#` starts a comment, surrounding quotes are stripped.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path);

/// Fills every option of `app` that was not given on the command line from
/// the file entries. Unknown keys raise UsageError.
void apply_config_file(CLI::App& app, const std::vector<std::pair<std::string, std::string>>& entries);

/// The fully resolved option set of `app`, in the same flat format.
std::string resolved_config(const CLI::App& app);

}  // namespace neuroflag::cli
