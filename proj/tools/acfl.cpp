#include <iostream>

#include "acfl/cli.hpp"

int main(int argc, char** argv) { return acfl::cli_main(argc, argv, std::cout, std::cerr); }
