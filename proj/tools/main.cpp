#include "pkgwave/cli.hpp"

int main(int argc, char** argv)
{
    return pkgwave::run_cli(argc, argv);
}
