#include "mixflow/cli.hpp"

int main(int argc, char** argv) { return mixflow::run(argc, argv); }
