#include "cascade_cli/commands.hpp"

#include <iostream>

int main(int argc, char** argv) { return cascade::cli::run_cli(argc, argv, std::cout, std::cerr); }
