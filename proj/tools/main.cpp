#include "hetdid/cli.hpp"

int main(int argc, char** argv) { return hetdid::cli::run(argc, argv); }
