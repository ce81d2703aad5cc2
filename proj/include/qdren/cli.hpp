#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qdren::cli {

enum ExitCode : int {
    kOk = 0,
    kInputError = 1,
    kUsageError = 2,
    kCheckFailed = 3,
};

/// Runs one command line (argv[0] is the program name) and returns its exit
/// code. Results go to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Same, for arguments without the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qdren::cli
