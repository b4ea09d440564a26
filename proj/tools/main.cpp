#include "cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return vmpg::cli::runCli(argc, argv, std::cout, std::cerr);
}
