#include <iostream>

#include "noov/cli.hpp"

int main(int argc, char** argv) {
  return noov::cli::run({argv + 1, argv + argc}, std::cout, std::cerr);
}
