#include <sde_sindy/harness/cli.hpp>

int main(int argc, char** argv) { return sde_sindy::harness::run_cli(argc, argv); }
