#include <string>
#include <vector>

#include "percept/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return percept::cli_main(args);
}
