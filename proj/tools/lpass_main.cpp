#include <lpass/cli.hpp>

#include <iostream>

int main(int argc, char** argv) { return lpass::cli::run(argc, argv, std::cout, std::cerr); }
