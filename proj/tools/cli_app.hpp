#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace alti::cli {

/// Runs the command line `args` (without the program name). Reports go to `out`,
/// diagnostics to `err`. Returns 0 on success, 1 on runtime errors, 2 on usage errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace alti::cli
