#include "gfpcc/cli.hpp"

int main(int argc, char** argv) { return gfpcc::cli_main(argc, argv); }
