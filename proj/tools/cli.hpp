#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace chewsense::cli {

/// Run the command line. Returns the process exit status: 0 on success,
/// 1 on a domain error, 2 on a usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace chewsense::cli
