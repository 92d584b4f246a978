#include "salgate/cli.hpp"

int main(int argc, char** argv) { return salgate::run_cli(argc, argv); }
