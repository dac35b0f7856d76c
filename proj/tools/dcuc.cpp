// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <iostream>

#include "dcuc/cli.hpp"

int main(int argc, char** argv) {
  return dcuc::cli::run({argv + 1, argv + argc}, std::cout, std::cerr);
}
