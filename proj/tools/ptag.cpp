#include "ptag/cli.hpp"

int main(int argc, char** argv) { return ptag::run_cli(argc, argv); }
