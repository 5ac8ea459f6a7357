#include <iostream>

#include "caed/cli.hpp"

int main(int argc, char** argv) { return caed::run(argc, argv, std::cout, std::cerr); }
