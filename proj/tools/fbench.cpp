#include <iostream>
#include <string>
#include <vector>

#include "fbench/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return fb::execute(args, std::cout, std::cerr);
}
