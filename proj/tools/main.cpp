#include "cli.hpp"

int main(int argc, char** argv) { return lcsm::cli::run(argc, argv); }
