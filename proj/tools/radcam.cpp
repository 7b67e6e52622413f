#include <iostream>
#include <string>
#include <vector>

#include "radcam/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  return radcam::run_cli(args, std::cout, std::cerr);
}
