#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mfpe::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitNumerical = 3,
  kExitTolerance = 4,
};

struct CommandOptions {
  /// One config; compare also accepts a second, which then supplies source b.
  std::vector<std::string> config_paths;
  std::string out_dir = "out";
  bool force = false;
  std::optional<int> threads;
};

/// Runs one of simulate, solve, compare, transform-check. Results go to
/// <out>/<config hash>/<command>/. Progress and the summary table go to
/// `log`, diagnostics to `err`.
int run_command(const std::string& command, const CommandOptions& options, std::ostream& log, std::ostream& err);

}  // namespace mfpe::cli
