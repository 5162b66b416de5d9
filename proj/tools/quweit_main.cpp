#include "quweit/cli.hpp"

int main(int argc, char** argv) {
    return quweit::cli_run(std::vector<std::string>(argv + 1, argv + argc));
}
