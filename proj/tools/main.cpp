#include "pipeline.hpp"

int main(int argc, char** argv) { return fort_cli::run(argc, argv); }
