#include "cli.hpp"

int main(int argc, char** argv) { return chewsense::cli::run(argc, argv); }
