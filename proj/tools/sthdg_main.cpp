#include "sthdg/cli.hpp"

int main(int argc, char** argv) { return sthdg::cli_main(argc, argv); }
