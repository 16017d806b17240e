#include "mrgen/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return mrgen::cli::run({argv, argv + argc}, std::cout, std::cerr); }
