#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sapnet {

// Exit codes: 0 success, 1 runtime error, 2 bad arguments.
int cli_main(int argc, const char* const* argv);
// `args` excludes the program name. Output goes to `out` unless --out is given.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sapnet
