#include "branchsim/cli.hpp"

int main(int argc, char** argv) { return branchsim::run_cli(argc, argv); }
