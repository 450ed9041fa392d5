#pragma once

#include <iosfwd>

namespace deconv::cli {

/// Exit statuses of the command-line front end.
enum Status : int {
  kOk = 0,
  kVerifyFailed = 1,
  kUsage = 2,
  kNotConverged = 3,
};

/// Runs one subcommand (gen, fit, verify, figures, rates, bounds).
/// `--config FILE` supplies flat key = value defaults; flags override them.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace deconv::cli
