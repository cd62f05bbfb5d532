#include "lesplat/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return lesplat::cli::run(argc, argv, std::cout, std::cerr); }
