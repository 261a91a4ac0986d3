#include "twave/cli.hpp"

int main(int argc, char** argv) { return twave::dispatch(argc, argv); }
