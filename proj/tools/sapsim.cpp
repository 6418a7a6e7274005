#include "sapnet/cli.hpp"

int main(int argc, char** argv) { return sapnet::cli_main(argc, argv); }
