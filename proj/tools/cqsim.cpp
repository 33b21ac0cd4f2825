#include "cqsim/cli.hpp"

int main(int argc, char** argv) { return cqsim::cli::run(argc, argv); }
