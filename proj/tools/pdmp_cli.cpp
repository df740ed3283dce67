#include "pdmp/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return pdmp::cli_main(argc, argv, std::cout, std::cerr); }
