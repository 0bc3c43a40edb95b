#include "simloop/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return simloop::run_cli(argc, argv, std::cout, std::cerr); }
