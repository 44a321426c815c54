#include "balancetree/cli.hpp"

int main(int argc, char** argv) { return balancetree::dispatch(argc, argv); }
