#include "cli.hpp"

int main(int argc, char** argv) { return phonrec::cli::main(argc, argv); }
