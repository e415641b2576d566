#include <iostream>
#include <string>
#include <vector>

#include "valign/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return valign::cli::run(args, std::cout, std::cerr);
}
