#include <iostream>

#include "snndelay_cli/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return snndelay::cli::run(args, std::cout, std::cerr);
}
