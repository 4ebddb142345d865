#include <iostream>

#include "malbehave/cli.hpp"

int main(int argc, char** argv) { return malbehave::run_cli(argc, argv, std::cout, std::cerr); }
