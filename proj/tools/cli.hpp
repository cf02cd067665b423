#pragma once

#include <iosfwd>
#include <span>
#include <string>

namespace flowcll::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kDataError = 2,
  kInternal = 3,
};

/// Runs one command line (args excludes the program name). Machine output
/// goes to `out`, logs and error JSON to `err`.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

} // namespace flowcll::cli
