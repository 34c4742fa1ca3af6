#include <iostream>

#include "hygro/cli.hpp"

int main(int argc, char** argv) { return hygro::cli::run(argc, argv, std::cout, std::cerr); }
