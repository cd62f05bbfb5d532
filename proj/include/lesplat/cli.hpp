#pragma once

#include <iosfwd>

namespace lesplat::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kDataError = 2,
    kTransportError = 3,
};

/// Entry point of the `lesplat` tool. Diagnostics go to `err`, reports to `out`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace lesplat::cli
