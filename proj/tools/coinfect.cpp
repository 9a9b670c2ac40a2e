#include "coinfect/cli.hpp"

int main(int argc, char** argv) { return coinfect::cli::run(argc, argv); }
