#include "plasticell/io/cli.hpp"

int main(int argc, char** argv) { return plasticell::io::run_cli(argc, argv); }
