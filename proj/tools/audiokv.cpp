// Copyright (C) 2026 The AudioKV Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <iostream>
#include <string>
#include <vector>

#include "audiokv/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        return audiokv::run_cli(args, std::cout, std::cerr);
    } catch (...) {
        return audiokv::report_current_exception(std::cerr);
    }
}
