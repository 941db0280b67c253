#include <iostream>
#include <string>
#include <vector>

#include "iceimpact/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return iceimpact::cli::run(args, std::cout, std::cerr);
}
