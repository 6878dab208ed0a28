#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace surfcdm {

/// Entry point of the `surfcdm` command. `args` excludes the program name.
/// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace surfcdm
