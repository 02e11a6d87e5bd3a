#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace actdet {

/// Exit status: 0 success, 1 input error, 2 stage failure. args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace actdet
