#include "lpinn/app.hpp"

int main(int argc, char** argv) { return lpinn::run_cli(argc, argv); }
