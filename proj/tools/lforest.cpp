#include <iostream>

#include "lf/cli.hpp"

int main(int argc, char** argv) { return lf::cli::run(argc, argv, std::cout, std::cerr); }
