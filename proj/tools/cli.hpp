#pragma once

#include <iosfwd>

namespace fwdpca {

/// Runs one command line. Exit codes: 0 success, 1 usage, 2 data, 3 numerical.
/// Errors go to `err` as "error[<category>]: <message>".
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fwdpca
