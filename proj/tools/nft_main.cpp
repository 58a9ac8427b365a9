#include <iostream>

#include "nft/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return nft::cli::run(args, std::cout, std::cerr);
}
