#pragma once

#include <iosfwd>

namespace edgehr::cli {

/// Runs the `edgehr` command line. JSON results go to `out`, diagnostics
/// and the single-line error to `err`. Returns 0 on success, 1 on an
/// expected failure and 2 on a usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace edgehr::cli
