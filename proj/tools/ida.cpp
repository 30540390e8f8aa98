#include <iostream>

#include "ida/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return ida::cli::run_command(args, std::cout, std::cerr);
}
