#include "rsde/experiments.hpp"

int main(int argc, char** argv) { return rsde::harness::run_cli(argc, argv); }
