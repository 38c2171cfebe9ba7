#include <iostream>

#include "gvk/cli/cli.hpp"

int main(int argc, char** argv) { return gvk::cli::dispatch(argc, argv, std::cout, std::cerr); }
