#pragma once

#include <ostream>

namespace radseq {

enum ExitCode : int {
  kExitOk = 0,
  kExitBadArguments = 2,
  kExitDataError = 3,
  kExitModelMismatch = 4,
};

/// gen-data | train | eval | recognize | visualize | serve
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace radseq
