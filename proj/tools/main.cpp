#include "cli/cli.hpp"
#include "neuroflag/allocator.hpp"

int main(int argc, char** argv) {
  neuroflag::tune_allocator();
  return neuroflag::cli::run(argc, argv);
}
