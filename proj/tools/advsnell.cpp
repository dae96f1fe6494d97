#include "advsnell/cli.hpp"

int main(int argc, char** argv) { return advsnell::cli::run({argv + 1, argv + argc}); }
