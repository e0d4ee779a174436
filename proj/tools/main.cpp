// Copyright 2026 The accboed Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

int main(int argc, char **argv) { return accboed::cli::main_entry(argc, argv); }
