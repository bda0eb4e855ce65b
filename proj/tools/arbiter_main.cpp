#include <iostream>

#include "arbiter/cli.hpp"

int main(int argc, char** argv) {
    return arbiter::dispatch(argc, argv, std::cout, std::cerr);
}
