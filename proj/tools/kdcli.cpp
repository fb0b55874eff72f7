#include <vector>
#include <string>

#include "kd/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return kd::cli_dispatch(args);
}
