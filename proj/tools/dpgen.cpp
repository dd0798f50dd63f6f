#include <string>
#include <vector>

#include "dpgen/cli.hpp"

int main(int argc, char** argv) {
    return dpgen::cli::run(std::vector<std::string>(argv, argv + argc));
}
