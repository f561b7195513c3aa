#include "commands.hpp"

int main(int argc, char** argv)
{
    return stratlasso::cli::run_cli(argc, argv);
}
