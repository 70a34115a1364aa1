#include "mhke/cli.hpp"

int main(int argc, char** argv) { return mhke::run_cli(argc, argv); }
