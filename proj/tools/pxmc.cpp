#include "pxmc/cli.hpp"

int main(int argc, char** argv) { return pxmc::run_cli(argc, argv); }
