#include "ofds/cli.hpp"

int main(int argc, char** argv) { return ofds::cli::run(argc, argv); }
