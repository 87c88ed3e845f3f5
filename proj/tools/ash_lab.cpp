#include "ash/cli.hpp"

int main(int argc, char** argv) { return ash::cli_main(argc, argv); }
