#pragma once

#include <string>
#include <vector>

namespace bidsel {

// Runs one CLI invocation (args exclude the program name). Returns the
// process exit status: 0 ok, 2 validation error, 3 runtime error. Errors are
// reported as a one-line JSON object on stderr.
int run_cli(const std::vector<std::string>& args);

}  // namespace bidsel
