#include <string>
#include <vector>

#include "fairgen/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return fairgen::cli::run(args);
}
