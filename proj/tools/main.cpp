#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) { return fwdpca::cli_dispatch(argc, argv, std::cout, std::cerr); }
