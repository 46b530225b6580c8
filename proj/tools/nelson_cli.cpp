#include <iostream>

#include "nelson/pipeline.hpp"

int main(int argc, char** argv) { return nelson::run_cli(argc, argv, std::cout, std::cerr); }
