#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tricluster {

// Runs one subcommand: synth, fit, stream or eval. `args` excludes the
// program name. Returns the process exit status.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tricluster
