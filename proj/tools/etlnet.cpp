#include "etlnet/cli.hpp"

int main(int argc, char** argv) { return etlnet::cli::dispatch(argc, argv); }
