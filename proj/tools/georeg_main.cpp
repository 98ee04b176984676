#include <iostream>
#include <string>
#include <vector>

#include "georeg/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return georeg::run_cli(args, std::cout, std::cerr);
}
