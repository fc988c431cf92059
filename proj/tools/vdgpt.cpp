#include <iostream>

#include "vdgpt/cli.hpp"

int main(int argc, char** argv) {
  return vdgpt::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
