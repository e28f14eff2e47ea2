#include "spvb/cli_io.hpp"

int main(int argc, char** argv) { return spvb::run_cli(argc, argv); }
