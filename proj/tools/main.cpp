#include "panelfm/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return panelfm::run_cli(argc, argv, std::cout, std::cerr); }
