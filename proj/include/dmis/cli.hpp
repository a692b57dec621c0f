#pragma once

#include <string>
#include <vector>

namespace dmis::cli {

// Entry point shared by the binary and the tests. Returns 0 on success, 1 on
// a domain error (single-line diagnostic on stderr), 2 on a usage error.
int run_command(const std::vector<std::string>& args);

} // namespace dmis::cli
