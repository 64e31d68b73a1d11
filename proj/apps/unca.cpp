// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0

#include <unca/cli.hpp>

#include <iostream>

int main(int argc, char **argv)
{
	return unca::cli_main(argc, argv, std::cout, std::cerr);
}
