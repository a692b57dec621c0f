#include <string>
#include <vector>

#include "dmis/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return dmis::cli::run_command(args);
}
