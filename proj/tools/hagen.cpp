#include <iostream>

#include "hagen/cli.hpp"

int main(int argc, char** argv) { return hagen::run_cli(argc, argv, std::cout, std::cerr); }
