// Copyright 2026 The Flexicache Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>
#include <vector>

#include "cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return flexi::cli::run_command(args, std::cout, std::cerr).exit_code;
}
