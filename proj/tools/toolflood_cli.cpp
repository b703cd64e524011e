#include <string>
#include <vector>

#include "toolflood/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return toolflood::run_cli(args);
}
