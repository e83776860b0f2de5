// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

int main(int argc, char** argv)
{
  std::vector<std::string> args(argv + 1, argv + argc);
  return engel::cli::run(std::move(args), std::cout, std::cerr);
}
