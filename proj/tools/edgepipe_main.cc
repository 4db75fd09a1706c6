// Copyright 2026 The edgepipe Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "edgepipe/cli.h"

int main(int argc, char** argv) {
  return edgepipe::run(argc, argv, std::cout, std::cerr);
}
