// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace dcuc::cli {

// Stable process exit codes.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kIo = 2,
  kDiverged = 3,
  kIntegrity = 4,
  kGradcheck = 5,
  kUsage = 64,
};

// Runs one command line (args excludes the program name). Results go to
// `out`, progress and diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace dcuc::cli
