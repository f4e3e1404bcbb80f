#include <iostream>

#include "loewner/cli.hpp"

int main(int argc, char** argv) {
  return loewner::run_cli(argc, argv, std::cout, std::cerr);
}
