#include "mainstreamlab/cli.hpp"

int main(int argc, char** argv) { return mainstreamlab::cli::run(argc, argv); }
