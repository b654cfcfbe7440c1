#include <string>
#include <vector>

#include "bidsel/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return bidsel::run_cli(args);
}
