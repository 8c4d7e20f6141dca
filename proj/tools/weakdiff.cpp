#include <iostream>
#include <string>
#include <vector>

#include "weakdiff/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return weakdiff::run_cli(args, std::cout, std::cerr);
}
