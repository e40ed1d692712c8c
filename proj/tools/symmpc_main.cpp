#include "symmpc/cli.hpp"

int main(int argc, char** argv) { return symmpc::cli_main(argc, argv); }
