#pragma once

#include <string>
#include <vector>

namespace homog {

/** Command-line front end.  Returns the process exit code:
 *  0 on success, 1 on configuration/usage errors, 2 on numerical failures
 *  (non-convergence, violated structural checks, out-of-range table use). */
int run_cli(int argc, const char* const* argv);

/// Same, for tests: `args` excludes the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace homog
