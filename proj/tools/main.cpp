#include <iostream>

#include "deconv/cli.hpp"

int main(int argc, char** argv) { return deconv::cli::run(argc, argv, std::cout, std::cerr); }
