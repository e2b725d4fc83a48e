#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace stancekit::cli {

// Runs one subcommand. `args` excludes the program name. Returns 0 on
// success, 1 when a stage fails (with a JSON error on `err`) and 2 for
// usage errors such as an unknown subcommand.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stancekit::cli
