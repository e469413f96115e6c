#include <iostream>
#include <string>
#include <vector>

#include "dgm/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return dgm::run_cli(args, std::cout, std::cerr);
}
