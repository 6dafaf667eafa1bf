#include "nsslab/cli/commands.hpp"

int main(int argc, char** argv) { return nsslab::cli::run(argc, argv); }
