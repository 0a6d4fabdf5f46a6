#include <aimc/cli.hpp>

#include <iostream>

int main(int argc, char** argv) { return aimc::run(argc, argv, std::cout, std::cerr); }
