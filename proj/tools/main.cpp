#include <vector>

#include "../src/cli/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return mctslab::cli::run_command(args);
}
