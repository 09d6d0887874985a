#include "oiekit/cli.hpp"

int main(int argc, char** argv) { return oiekit::cli::run(argc, argv); }
