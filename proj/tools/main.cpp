#include "advrl/cli.hpp"

int main(int argc, char** argv) { return advrl::cli::run(argc, argv); }
