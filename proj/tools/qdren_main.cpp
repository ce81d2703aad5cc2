#include <iostream>

#include "qdren/cli.hpp"

int main(int argc, char** argv) { return qdren::cli::run(argc, argv, std::cout, std::cerr); }
