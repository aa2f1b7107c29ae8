#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mcrank::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsageError = 1,
  kDataError = 2,
  kInternalError = 3,
};

/// Runs one subcommand: index, retrieve, train, rerank, eval, compare or
/// demo. `args` excludes the program name. Diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Merges a flat `key = value` file into an argument list: every key that
/// is not already given as `--key` on the command line is appended as
/// `--key value...` (whitespace-separated values become separate tokens).
/// Lines starting with '#' or ';' are comments.
std::vector<std::string> merge_config_file(const std::vector<std::string>& args,
                                           const std::string& config_path);

}  // namespace mcrank::cli
