#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace slitbundle::cli {

/// Exit codes shared by all subcommands.
enum Exit : int {
  kOk = 0,
  kCheckFailed = 1,      // verify / validate found a violated identity or threshold
  kNotGenerating = 2,    // check: not bracket-generating; plan: NotReachable
  kInconclusive = 3,     // check: depth cap reached without a verdict
  kNoConvergence = 4,    // plan: all restarts exhausted
  kMalformed = 64,       // bad arguments, config, region or trajectory file
  kNumericFailure = 70,  // integration or linear-algebra failure
};

/// Runs the command line `args` (without the program name). Normal output goes
/// to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace slitbundle::cli
