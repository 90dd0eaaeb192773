#include <iostream>
#include <string>
#include <vector>

#include "ae/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ae::cli::run_cli(args, std::cout, std::cerr);
}
