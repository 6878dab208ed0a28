#include <iostream>
#include <string>
#include <vector>

#include "surfcdm/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return surfcdm::run_cli(args, std::cout, std::cerr);
}
