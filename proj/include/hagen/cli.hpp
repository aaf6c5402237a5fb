#pragma once

#include <iosfwd>

namespace hagen {

/// Entry point of the `hagen` command. Returns the process exit code:
/// 0 success, 2 input or configuration error, 3 numerical failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hagen
