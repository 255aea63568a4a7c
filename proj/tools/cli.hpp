/**
 * @file
 * The `q2pc` command line, callable in-process.
 */
#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace q2pc::cli {

enum ExitCode : int {
    kOk = 0,
    kRejected = 1,  ///< protocol abort, proof rejection or failed experiment
    kUsage = 2,
};

/// args excludes the program name. Every random choice derives from --seed.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace q2pc::cli
