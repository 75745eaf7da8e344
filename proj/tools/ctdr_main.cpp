#include <string>
#include <vector>

#include "ctdr/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ctdr::run_cli(args);
}
