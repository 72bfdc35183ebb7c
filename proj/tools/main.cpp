#include "commands.hpp"

int main(int argc, char** argv) { return robandit::cli::run(argc, argv); }
