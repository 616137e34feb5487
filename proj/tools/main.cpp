#include "confex/cli.hpp"

int main(int argc, char** argv) { return confex::cli::run(argc, argv); }
