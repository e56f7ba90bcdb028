#include "irisseg/cli.hpp"

int main(int argc, char** argv) { return irisseg::cli::run(argc, argv); }
