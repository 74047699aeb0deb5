#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cdb {

/// Runs the command-line tool with `args` (program name excluded). Returns
/// the exit code: 0 on success, 1 on a runtime error, 2 on a usage error.
/// Errors are written to `err` as one JSON object.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cdb
