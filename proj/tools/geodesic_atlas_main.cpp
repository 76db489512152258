#include <iostream>
#include <string>
#include <vector>

#include "geodesic_atlas/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return geodesic_atlas::run_cli(args, std::cout, std::cerr);
}
