#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qpm::cli {

/// Runs the qpmtk command line. `args` excludes the program name.
/// Returns 0 on success, 2 on invalid input, 3 when the requested process is
/// physically infeasible, 1 on any other failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qpm::cli
