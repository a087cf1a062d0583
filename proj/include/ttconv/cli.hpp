#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ttconv::cli {

enum ExitCode : int {
    kOk = 0,
    kCheckFailed = 1,  // gradcheck failure, divergence, other runtime failure
    kParseError = 2,   // bad flags, config, or file contents
    kShapeError = 3,   // shape, factor, or rank mismatch
    kIoError = 4,
    kMissingLog = 5,
};

// Runs one `ttconv` command. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ttconv::cli
