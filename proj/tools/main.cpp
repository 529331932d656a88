#include "mvjump/cli.hpp"

int main(int argc, char** argv) { return mvjump::cli::run(argc, argv); }
