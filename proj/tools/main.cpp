#include <string>
#include <vector>

#include "pssl/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return pssl::cli::run_command(args);
}
