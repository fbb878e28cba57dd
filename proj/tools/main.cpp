#include <string>
#include <vector>

#include "bulkedge/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return bulkedge::cli::run(args);
}
