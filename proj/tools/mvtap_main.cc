#include <iostream>
#include <string>
#include <vector>

#include "mvtap/cli.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return mvtap::RunCli(args, std::cout, std::cerr);
}
