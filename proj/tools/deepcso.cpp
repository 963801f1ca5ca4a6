#include <iostream>
#include <string>
#include <vector>

#include "deepcso/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return deepcso::run_cli(args, std::cout, std::cerr);
}
