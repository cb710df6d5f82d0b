#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace evedge::cli {

/// Runs one command line (args[0] is the program name). Returns the exit
/// code: 0 success, 1 validation error, 2 runtime error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace evedge::cli
