// Copyright (c) 2026 taskvec authors
// SPDX-License-Identifier: Apache-2.0

#include <string>
#include <vector>

#include "taskvec/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return taskvec::run_cli(args);
}
