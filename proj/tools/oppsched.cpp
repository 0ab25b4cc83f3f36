#include <iostream>
#include <string>
#include <vector>

#include "app.hpp"
#include "oppsched/kernels.hpp"

int main(int argc, char** argv) {
    oppsched::apply_thread_cap_from_env();
    const std::vector<std::string> args(argv + 1, argv + argc);
    return oppsched::cli::run(args, std::cout, std::cerr);
}
