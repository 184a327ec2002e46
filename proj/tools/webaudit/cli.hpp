#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace webaudit::cli {

enum ExitCode : int { kDefinitive = 0, kInconclusive = 1, kUsage = 2 };

/// Runs one command line (without the program name). Reports go to --out
/// when given, otherwise to `out`; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace webaudit::cli
