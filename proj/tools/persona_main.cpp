#include "persona/cli.hpp"

int main(int argc, char** argv) { return persona::cli::run(argc, argv); }
