#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace kinex {

// Runs one CLI invocation. `args` excludes the program name. Returns the exit
// code: 0 success, 1 runtime or data error, 2 usage or configuration error.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kinex
