#include "rvcheck/cli.hpp"

int main(int argc, char** argv) {
    return rvcheck::run_cli(argc, argv);
}
