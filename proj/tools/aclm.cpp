#include <string>
#include <vector>

#include "aclm/cli.hpp"

int main(int argc, char** argv) {
  return aclm::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
