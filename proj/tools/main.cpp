#include <iostream>

#include "flowdepth/cli.hpp"

int main(int argc, char** argv) { return flowdepth::cli::run(argc, argv, std::cout, std::cerr); }
