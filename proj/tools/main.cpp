#include <iostream>

#include "lhn/cli.hpp"

int main(int argc, char** argv) { return lhn::cli::run(argc, argv, std::cout, std::cerr); }
