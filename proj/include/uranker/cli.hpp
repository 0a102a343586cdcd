#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

namespace uranker::cli {

/// Runs one subcommand. `args` excludes the program name. Exit codes: 0 ok,
/// 1 runtime failure (one JSON line on `err`), 2 bad usage.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Flat `key = value` file; '#' starts a comment. A JSON run snapshot is
/// accepted too, in which case its "config" object is used.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path);

/// Snapshot path written next to an output file or directory.
std::filesystem::path snapshot_path(const std::filesystem::path& output);

}  // namespace uranker::cli
