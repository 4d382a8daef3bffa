#include "dsnb/cli.hpp"

int main(int argc, char** argv) { return dsnb::run_cli(argc, argv); }
