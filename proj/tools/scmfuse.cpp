#include <iostream>

#include "scmfuse/cli.hpp"

int main(int argc, char** argv) {
    return scmfuse::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
