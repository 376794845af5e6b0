#include "wgrisk/cli.hpp"

int main(int argc, char** argv) { return wgrisk::run_cli(argc, argv); }
