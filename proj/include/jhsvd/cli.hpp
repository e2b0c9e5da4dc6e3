#pragma once

// Command-line front end.  Exit codes: 0 ok, 2 usage or invalid argument,
// 3 numeric failure, 4 I/O failure, 1 anything unexpected.

#include <iosfwd>
#include <string>
#include <vector>

namespace jhsvd {

/// args excludes the program name.  Environment overrides:
/// JHSVD_WIDTH (default block width), JHSVD_STRATEGY (default strategy).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace jhsvd
