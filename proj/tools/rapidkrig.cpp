#include "rapidkrig/bench/cli.hpp"

int main(int argc, char** argv) { return rapidkrig::bench::cli_main(argc, argv); }
