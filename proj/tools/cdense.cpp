#include "cdense/cli.hpp"

int main(int argc, char** argv) { return cdense::cli::run(argc, argv); }
