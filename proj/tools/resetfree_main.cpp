#include "resetfree/cli.hpp"

int main(int argc, char** argv) { return resetfree::cli_main(argc, argv); }
