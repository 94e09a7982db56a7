#include "tkest/cli.hpp"

int main(int argc, char** argv) { return tkest::cli::run(argc, argv); }
