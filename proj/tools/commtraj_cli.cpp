#include "commtraj/cli.hpp"

int main(int argc, char** argv) { return commtraj::run_cli(argc, argv); }
