#include "topopt/cli.hpp"

int main(int argc, char** argv) { return topopt::cli::run_cli(argc, argv); }
