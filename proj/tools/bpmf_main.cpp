#include "bpmf/cli.hpp"

int main(int argc, char** argv) { return bpmf::cli::main(argc, argv); }
