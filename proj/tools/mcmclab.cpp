#include <iostream>

#include "mcmclab/cli.hpp"

int main(int argc, char** argv) { return mcmclab::main_entry(argc, argv, std::cout, std::cerr); }
