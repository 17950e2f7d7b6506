#include <nsfde/cli_app.hpp>

int main(int argc, char** argv) { return nsfde::cli::run_cli(argc, argv); }
