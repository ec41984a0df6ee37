#include <iostream>
#include <string>
#include <vector>

#include "tricluster/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return tricluster::cli_main(args, std::cout, std::cerr);
}
