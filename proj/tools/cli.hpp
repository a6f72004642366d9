#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace phonrec::cli {

// Runs one subcommand. Returns the process exit code: 0 success, 2 input
// error, 3 numeric failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace phonrec::cli
