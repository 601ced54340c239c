#pragma once

#include <string>
#include <vector>

namespace mothernet {

// Entry point behind the `mothernet` binary; `args` excludes the program
// name. Returns 0 on success, 1 on a runtime failure, 2 on a usage error.
int run_cli(const std::vector<std::string>& args);

}  // namespace mothernet
