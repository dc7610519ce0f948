#include "odip/harness/commands.h"

int main(int argc, char** argv) { return odip::harness::CliMain(argc, argv); }
