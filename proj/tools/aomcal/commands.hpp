#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace aomcal::cli {

/// Parses and runs one command line. Returns the process exit code:
/// 0 success, 2 configuration error, 3 data error, 4 numeric error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace aomcal::cli
