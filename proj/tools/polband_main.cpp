#include <iostream>

#include "polband/cli.hpp"

int main(int argc, char** argv) { return polband::run_cli(argc, argv, std::cout, std::cerr); }
