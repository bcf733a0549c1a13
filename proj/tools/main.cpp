#include <iostream>

#include "spillover/cli_io.hpp"

int main(int argc, char** argv) { return spillover::run_command(argc, argv, std::cout, std::cerr); }
