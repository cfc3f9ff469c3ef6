#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace persistlens::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kPipelineFailure = 2,
    kDegenerate = 3,
};

// Full command-line front end. argv[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace persistlens::cli
