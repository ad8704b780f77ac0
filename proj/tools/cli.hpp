#pragma once

#include <string>
#include <vector>

namespace jccp::cli {

enum ExitCode : int {
  kOk = 0,
  kInputError = 1,
  kNotConverged = 2,
  kGradientFailure = 3,
};

/// Runs the command line; returns the process exit code. Output goes to
/// stdout/stderr and to the files named by each subcommand.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

/// "lo:hi:step" -> lo, lo + step, ... <= hi, with hi appended when the
/// step does not land on it. Throws ValidationError on a malformed grid.
std::vector<double> parse_grid(const std::string& text);

/// Fixed 12-significant-digit rendering used by every CSV.
std::string format_number(double v);

}  // namespace jccp::cli
