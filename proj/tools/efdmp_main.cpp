// Apache License, Version 2.0, refer to LICENSE.txt

#include <iostream>

#include "efdmp/commands.hpp"

int main(int argc, char** argv) { return efdmp::cli::run(argc, argv, std::cout, std::cerr); }
