#include "pacb/cli.hpp"

int main(int argc, char** argv) { return pacb::cli::run(argc, argv); }
