// Writes the bundled synthetic playscript corpus to a file, for inspection
// or for feeding external tools. Training uses the same generator in-process
// when no --data file is given.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include "quweit/dataset.hpp"

int main(int argc, char** argv) {
    std::uint64_t seed = 1;
    std::size_t bytes = 1 << 19;
    std::string path = "corpus.txt";
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        auto next = [&]() -> std::string {
            if (i + 1 >= argc) {
                std::cerr << "missing value for " << arg << "\n";
                std::exit(2);
            }
            return argv[++i];
        };
        if (arg == "--seed") seed = std::stoull(next());
        else if (arg == "--bytes") bytes = std::stoull(next());
        else if (arg == "--out") path = next();
        else {
            std::cerr << "usage: quweit-make-corpus [--seed N] [--bytes N] [--out FILE]\n";
            return arg == "--help" ? 0 : 2;
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        std::cerr << "cannot write '" << path << "'\n";
        return 1;
    }
    out << quweit::synthetic_playscript(seed, bytes);
    std::cout << "wrote " << bytes << "+ bytes to " << path << "\n";
    return 0;
}
