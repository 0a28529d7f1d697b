#include "dpost/cli/app.h"

int main(int argc, char** argv) { return dpost::cli::run_cli(argc, argv); }
