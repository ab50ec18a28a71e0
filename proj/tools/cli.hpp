#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace delaykern::cli {

enum ExitCode : int { ok = 0, config_error = 2, numerical_error = 3 };

/// Runs one command line (args excludes the program name). Output files go
/// under --out; errors are written to err as a single JSON object.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace delaykern::cli
