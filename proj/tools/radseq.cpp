#include "radseq/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return radseq::run_cli(argc, argv, std::cout, std::cerr); }
