#include "cli.hpp"

int main(int argc, char** argv) { return jccp::cli::run(argc, argv); }
