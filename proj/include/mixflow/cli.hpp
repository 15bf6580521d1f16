#pragma once

#include <string>
#include <vector>

namespace mixflow {

/// Exit codes: 0 success, 1 runtime fault, 2 usage or configuration error.
int run(int argc, const char* const* argv);
/// Same as above with argv[0] omitted.
int run(const std::vector<std::string>& args);

} // namespace mixflow
