#include "rootsr/cli.hpp"

int main(int argc, char** argv) { return rootsr::cli::run(argc, argv); }
