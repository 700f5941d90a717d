#include "hmgan/cli.hpp"

int main(int argc, char** argv) { return hmgan::cli::run(argc, argv); }
