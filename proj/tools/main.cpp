// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "gob/cli/commands.hpp"

int main(int argc, char** argv) {
  return gob::cli::run(argc, argv, std::cout, std::cerr);
}
