#pragma once

#include <iosfwd>

namespace flowdepth::cli {

/// Runs one subcommand. Returns 0 on success, 2 on a usage error and 1 on a
/// runtime failure (with a one-line message on err).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace flowdepth::cli
