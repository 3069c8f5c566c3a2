#include "cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return edgehr::cli::run(argc, argv, std::cout, std::cerr); }
