#include <iostream>

#include "gnnear/cli.h"

int main(int argc, char** argv) {
  return gnnear::cli::run(argc, argv, std::cout, std::cerr);
}
