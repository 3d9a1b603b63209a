#pragma once

#include <string>
#include <vector>

namespace percept {

// Runs the percept command line. args excludes the program name.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
int cli_main(const std::vector<std::string>& args);

}  // namespace percept
