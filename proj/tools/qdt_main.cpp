#include "qdt/cli.hpp"

int main(int argc, char** argv) { return qdt::cli::run(argc, argv); }
