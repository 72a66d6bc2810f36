#include "cli.hpp"

int main(int argc, char** argv) { return subcm::cli::cli_main(argc, argv); }
