#pragma once

#include <ostream>

namespace curvens {

/// Entry point of the curvens command line. Returns the process exit code:
/// 0 on success, 2 for usage or configuration errors, 1 for runtime errors.
int run_cli(int argc, const char * const * argv, std::ostream & out, std::ostream & err);

}  // namespace curvens
