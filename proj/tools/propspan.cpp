#include <iostream>

#include "propspan/cli.hpp"

int main(int argc, char** argv) {
  return propspan::cli::run(argc, argv, std::cout, std::cerr);
}
