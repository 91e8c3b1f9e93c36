#include "fieldswarm/cli.hpp"

int main(int argc, char** argv) { return fieldswarm::run_cli(argc, argv); }
