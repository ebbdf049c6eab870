#include "rlis/cli.hpp"

int main(int argc, char** argv) { return rlis::cli_dispatch(argc, argv); }
