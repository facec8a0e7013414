#include "lpre/cli_io.hpp"

int main(int argc, char** argv) { return lpre::cli_main(argc, argv); }
