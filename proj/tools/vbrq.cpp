#include "vbrq/cli.hpp"

int main(int argc, char** argv) { return vbrq::cli::run(argc, argv); }
