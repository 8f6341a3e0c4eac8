#include <iostream>
#include <string>
#include <vector>

#include "l2ext/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return l2ext::cli::run(args, std::cout, std::cerr);
}
