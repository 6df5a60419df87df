#include <iostream>

#include "plume/cli.hpp"

int main(int argc, char** argv) { return plume::cli::run(argc, argv, std::cout, std::cerr); }
