#include <iostream>

#include "polarforge/harness.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return polarforge::run_pipeline(args, std::cout, std::cerr);
}
