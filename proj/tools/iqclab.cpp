#include "iqclab/cli.hpp"

int main(int argc, char** argv) { return iqclab::cli::run(argc, argv); }
