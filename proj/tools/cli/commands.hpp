#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pmuopt::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kSimulationError = 3, kScoringError = 4 };

/// Runs `pmuopt <command> ...`; args exclude the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Expands `--config file.json` into flags. Nested objects are flattened,
/// arrays joined with commas. Flags given on the command line win.
std::vector<std::string> expand_config(const std::vector<std::string>& args);

}  // namespace pmuopt::cli
