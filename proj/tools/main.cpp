#include <iostream>

#include "causaldebias/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cdb::run_cli(args, std::cout, std::cerr);
}
