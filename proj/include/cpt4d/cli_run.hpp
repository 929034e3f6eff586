// Copyright 2026 The cpt4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Argument parsing and dispatch for the cpt4d binary. Errors leave the
// process with a documented, machine-distinguishable exit code and a single
// "error: <class>: <message>" line on stderr.

#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "cpt4d/cli.hpp"

namespace cpt4d::cli {

inline constexpr const char* kExitCodeDoc =
    "exit codes:\n"
    "  0  success\n"
    "  1  internal error\n"
    "  2  configuration error (unknown key, bad value, bad usage)\n"
    "  3  missing input file\n"
    "  4  geometry mismatch\n"
    "  5  shape mismatch\n"
    "  6  domain error (state or amplitude out of range)\n"
    "  7  tracking failure\n"
    "  8  training divergence\n"
    "  9  contract violation\n"
    "  10 file format error\n";

inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{
      "cpt4d: template-free 4d reconstruction on a synthetic breathing "
      "phantom. Pipeline order: phantom, acquire, surrogate, train, "
      "reconstruct | baseline, evaluate, ablate."};
  app.footer(kExitCodeDoc);
  app.require_subcommand(1);

  std::string config_path, workdir;
  std::uint64_t seed = 0;
  std::vector<std::string> sets;
  auto* opt_config =
      app.add_option("--config", config_path, "key = value config file");
  auto* opt_workdir =
      app.add_option("--workdir", workdir, "working directory for artifacts");
  auto* opt_seed = app.add_option("--seed", seed, "global random seed");
  app.add_option("--set", sets, "override any config key, KEY=VALUE");

  auto* c_phantom =
      app.add_subcommand("phantom", "render phantom volumes at amplitudes");
  auto* c_acquire =
      app.add_subcommand("acquire", "simulate the interleaved acquisition");
  auto* c_surrogate =
      app.add_subcommand("surrogate", "extract the respiratory signal");
  auto* c_train = app.add_subcommand("train", "jointly optimize the networks");
  auto* c_recon =
      app.add_subcommand("reconstruct", "reconstruct volumes at states");
  auto* c_baseline =
      app.add_subcommand("baseline", "amplitude-sorted stacking baseline");
  auto* c_eval =
      app.add_subcommand("evaluate", "score reconstruction vs baseline");
  auto* c_ablate = app.add_subcommand("ablate", "sweep one training axis");
  std::string axis = "omega";
  std::string values_csv = "1,7,30";
  c_ablate->add_option("--axis", axis,
                       "omega | depth | width | data_fraction");
  c_ablate->add_option("--values", values_csv, "comma-separated sweep values");
  for (auto* sub : {c_phantom, c_acquire, c_surrogate, c_train, c_recon,
                    c_baseline, c_eval, c_ablate}) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return static_cast<int>(ErrorCode::kConfig);
  }

  try {
    RunConfig cfg;
    if (*opt_config) cfg.load_file(config_path);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      require(eq != std::string::npos, ErrorCode::kConfig,
              "--set expects KEY=VALUE, got: " + kv);
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (*opt_workdir) cfg.set("workdir", workdir);
    if (*opt_seed) cfg.set("seed", std::to_string(seed));

    if (c_phantom->parsed()) return cmd_phantom(cfg);
    if (c_acquire->parsed()) return cmd_acquire(cfg);
    if (c_surrogate->parsed()) return cmd_surrogate(cfg);
    if (c_train->parsed()) return cmd_train(cfg);
    if (c_recon->parsed()) return cmd_reconstruct(cfg);
    if (c_baseline->parsed()) return cmd_baseline(cfg);
    if (c_eval->parsed()) return cmd_evaluate(cfg);
    if (c_ablate->parsed()) {
      std::vector<double> values;
      {
        std::stringstream ss(values_csv);
        std::string item;
        while (std::getline(ss, item, ','))
          if (!item.empty()) values.push_back(std::stod(item));
      }
      return cmd_ablate(cfg, axis, values);
    }
    fail(ErrorCode::kConfig, "no subcommand selected");
  } catch (const Error& e) {
    std::cerr << "error: " << e.code_name() << ": " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

inline int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("cpt4d");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace cpt4d::cli
