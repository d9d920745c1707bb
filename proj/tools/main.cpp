#include <vector>

#include "cloth/cli.hpp"

int main(int argc, char** argv) {
  return cloth::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
