#include <iostream>

#include "tikreg_tools/cli.hpp"

int main(int argc, char** argv) { return tikreg::tools::restore_main(argc, argv, std::cout, std::cerr); }
