#include <iostream>
#include <string>
#include <vector>

#include "kgflow/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return kgflow::cli::dispatch(args, std::cout, std::cerr);
}
