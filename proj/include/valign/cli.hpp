#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace valign::cli {

/// Runs the command line (args excludes the program name). Returns the
/// process exit code: 0 success, 1 usage error, 2 data error, 3 backend
/// error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace valign::cli
