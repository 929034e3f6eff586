// Copyright 2026 The cpt4d Authors
// SPDX-License-Identifier: Apache-2.0

#include "cpt4d/cli_run.hpp"

int main(int argc, char** argv) { return cpt4d::cli::run_cli(argc, argv); }
