#include "fcs/cli.hpp"

int main(int argc, char** argv) { return fcs::run_cli(argc, argv); }
