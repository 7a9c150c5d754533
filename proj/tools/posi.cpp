#include "stabposi/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return stabposi::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
