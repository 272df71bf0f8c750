#include <iostream>

#include "evtes/commands.hpp"

int main(int argc, char** argv) { return evtes::run_cli(argc, argv, std::cout, std::cerr); }
