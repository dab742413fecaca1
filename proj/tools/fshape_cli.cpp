#include "fshapes/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return fshapes::run_cli(argc, argv, std::cout, std::cerr); }
