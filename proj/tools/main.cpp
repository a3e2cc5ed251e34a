#include <iostream>

#include "cogtune/cli.hpp"

int main(int argc, char** argv) { return cogtune::cli::run(argc, argv, std::cout, std::cerr); }
