#include "cli.hpp"

int main(int argc, char** argv) { return momenta::cli::run(argc, argv); }
