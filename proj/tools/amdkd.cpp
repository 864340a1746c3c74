#include "amdkd/bench.hpp"

int main(int argc, char** argv) { return amdkd::cli_main(argc, argv); }
