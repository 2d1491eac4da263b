#include "eplse/cli.hpp"

int main(int argc, char** argv) { return eplse::cli::main(argc, argv); }
