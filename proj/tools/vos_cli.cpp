#include "vos/cli.hpp"

int main(int argc, char** argv) { return vos::cli::dispatch(argc, argv); }
