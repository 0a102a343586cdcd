#include <iostream>
#include <string>
#include <vector>

#include "uranker/cli.hpp"

int main(int argc, char** argv) {
  return uranker::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
