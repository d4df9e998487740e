#include "ddro/cli.hpp"

int main(int argc, char** argv) { return ddro::cli_main(argc, argv); }
