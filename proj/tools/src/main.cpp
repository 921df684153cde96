#include <iostream>

#include "kgax_cli/cli.hpp"

int main(int argc, char** argv) {
  return kgax::cli::run_command(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
