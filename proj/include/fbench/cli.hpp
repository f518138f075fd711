#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fbench/config.hpp"

namespace fb {

// Runs one fbench command line (args excludes the program name). Returns the
// process exit status: 0 on success, 1 on a reported error, 2 on bad usage.
int execute(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// "a..b" (inclusive) or a single seed.
SeedRange parse_seed_range(const std::string& text);

}  // namespace fb
