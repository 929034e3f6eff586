// Copyright 2026 The cpt4d Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>

#include "cpt4d/cli_run.hpp"

using namespace cpt4d;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  return std::string((std::istreambuf_iterator<char>(f)), {});
}

// Desk-scale pipeline configuration that runs in seconds.
std::vector<std::string> mini_overrides(const std::string& workdir) {
  return {
      "--workdir", workdir,
      "--seed", "42",
      "--set", "acq_positions=6",
      "--set", "acq_sweeps=10",
      "--set", "acq_y0=38",
      "--set", "acq_stride=4",
      "--set", "train_epochs=120",
      "--set", "train_meta_batch=4",
      "--set", "train_points=700",
      "--set", "train_lr=3e-4",
      "--set", "train_tmn_depth=3",
      "--set", "train_tmn_width=32",
      "--set", "train_tmn_omega0=7",
      "--set", "train_san_depth=3",
      "--set", "train_san_width=48",
      "--set", "train_checkpoint_every=60",
      "--set", "recon_states=0.25,0.75",
      "--set", "recon_export_mip=1",
  };
}

int run_step(const std::string& cmd, const std::string& workdir,
             std::vector<std::string> extra = {}) {
  std::vector<std::string> args{cmd};
  auto base = mini_overrides(workdir);
  args.insert(args.end(), base.begin(), base.end());
  args.insert(args.end(), extra.begin(), extra.end());
  return cli::run_cli(args);
}

}  // namespace

TEST_CASE("full mini pipeline runs end to end") {
  const std::string wd =
      (fs::temp_directory_path() / "cpt4d_cli_pipeline").string();
  fs::remove_all(wd);

  REQUIRE(run_step("phantom", wd) == 0);
  REQUIRE(fs::exists(fs::path(wd) / "phantom" / "phantom_000.cvol"));
  REQUIRE(fs::exists(fs::path(wd) / "phantom" / "phantom.spec"));
  REQUIRE(fs::exists(fs::path(wd) / "phantom" / "resolved.cfg"));
  {
    auto vol = load_volume((fs::path(wd) / "phantom" / "phantom_000.cvol").string());
    REQUIRE(vol.nx == 96);
    REQUIRE(vol.ny == 96);
    REQUIRE(vol.nz == 64);
  }

  REQUIRE(run_step("acquire", wd) == 0);
  REQUIRE(fs::exists(fs::path(wd) / "dataset" / "manifest.txt"));
  REQUIRE(fs::exists(fs::path(wd) / "dataset" / "groundtruth.sidecar"));

  REQUIRE(run_step("surrogate", wd) == 0);
  REQUIRE(fs::exists(fs::path(wd) / "surrogate" / "signal.csv"));

  REQUIRE(run_step("train", wd) == 0);
  REQUIRE(fs::exists(fs::path(wd) / "model" / "tmn.ckpt"));
  REQUIRE(fs::exists(fs::path(wd) / "model" / "san.ckpt"));
  REQUIRE(fs::exists(fs::path(wd) / "model" / "model.manifest"));
  REQUIRE(fs::exists(fs::path(wd) / "model" / "ckpt_tmn_000060.ckpt"));
  REQUIRE(fs::exists(fs::path(wd) / "model" / "trainlog.csv"));

  REQUIRE(run_step("reconstruct", wd) == 0);
  REQUIRE(fs::exists(fs::path(wd) / "recon" / "recon_000.cvol"));
  REQUIRE(fs::exists(fs::path(wd) / "recon" / "recon_001.cvol"));
  REQUIRE(fs::exists(fs::path(wd) / "recon" / "recon_000_mip.pgm"));

  REQUIRE(run_step("baseline", wd) == 0);
  REQUIRE(fs::exists(fs::path(wd) / "baseline" / "bin_00.cvol"));
  REQUIRE(fs::exists(fs::path(wd) / "baseline" / "bin_09.cvol"));
  REQUIRE(fs::exists(fs::path(wd) / "baseline" / "gap_report.csv"));

  REQUIRE(run_step("evaluate", wd) == 0);
  REQUIRE(fs::exists(fs::path(wd) / "eval" / "inr_eval.csv"));
  REQUIRE(fs::exists(fs::path(wd) / "eval" / "baseline_eval.csv"));
  REQUIRE(fs::exists(fs::path(wd) / "eval" / "summary.txt"));

  // Rerunning evaluation on unchanged inputs reproduces identical bytes.
  auto before_inr = slurp(fs::path(wd) / "eval" / "inr_eval.csv");
  auto before_base = slurp(fs::path(wd) / "eval" / "baseline_eval.csv");
  auto before_sum = slurp(fs::path(wd) / "eval" / "summary.txt");
  REQUIRE(run_step("evaluate", wd) == 0);
  REQUIRE(slurp(fs::path(wd) / "eval" / "inr_eval.csv") == before_inr);
  REQUIRE(slurp(fs::path(wd) / "eval" / "baseline_eval.csv") == before_base);
  REQUIRE(slurp(fs::path(wd) / "eval" / "summary.txt") == before_sum);

  REQUIRE(run_step("ablate", wd,
                   {"--axis", "width", "--values", "24"}) == 0);
  REQUIRE(fs::exists(fs::path(wd) / "ablation" / "width.csv"));
  {
    auto table = slurp(fs::path(wd) / "ablation" / "width.csv");
    REQUIRE(table.find("axis,value,val_mae,val_mse,trajectory_mae") == 0);
    REQUIRE(table.find("width,24,") != std::string::npos);
  }
}

TEST_CASE("exit codes are distinct and documented") {
  const std::string wd = (fs::temp_directory_path() / "cpt4d_cli_err").string();
  fs::remove_all(wd);

  // Unknown config key.
  REQUIRE(cli::run_cli({"phantom", "--workdir", wd, "--set",
                        "not_a_key=1"}) ==
          static_cast<int>(ErrorCode::kConfig));
  // Missing input files.
  REQUIRE(cli::run_cli({"train", "--workdir", wd}) ==
          static_cast<int>(ErrorCode::kMissingFile));
  REQUIRE(cli::run_cli({"evaluate", "--workdir", wd}) ==
          static_cast<int>(ErrorCode::kMissingFile));
  // Missing config file.
  REQUIRE(cli::run_cli({"phantom", "--config", wd + "/nope.cfg"}) ==
          static_cast<int>(ErrorCode::kMissingFile));
  // Bad geometry.
  REQUIRE(cli::run_cli({"acquire", "--workdir", wd, "--set",
                        "acq_navigator_x=500"}) ==
          static_cast<int>(ErrorCode::kGeometry));
  // Bad usage.
  REQUIRE(cli::run_cli({"no_such_command"}) ==
          static_cast<int>(ErrorCode::kConfig));
}

TEST_CASE("config file loads and flags win over it") {
  const std::string wd = (fs::temp_directory_path() / "cpt4d_cli_cfg").string();
  fs::remove_all(wd);
  fs::create_directories(wd);
  const std::string cfg_path = wd + "/run.cfg";
  {
    std::ofstream f(cfg_path);
    f << "# comment line\n";
    f << "phantom_nx = 48\n";
    f << "phantom_amplitudes = 0,1\n";
    f << "workdir = " << wd << "\n";
  }
  REQUIRE(cli::run_cli({"phantom", "--config", cfg_path, "--set",
                        "phantom_nx=32"}) == 0);
  auto vol = load_volume((fs::path(wd) / "phantom" / "phantom_000.cvol").string());
  REQUIRE(vol.nx == 32);  // flag beat the file
  auto resolved = slurp(fs::path(wd) / "phantom" / "resolved.cfg");
  REQUIRE(resolved.find("phantom_nx = 32") != std::string::npos);

  std::ofstream bad(wd + "/bad.cfg");
  bad << "phantom_nx 48\n";
  bad.close();
  REQUIRE(cli::run_cli({"phantom", "--config", wd + "/bad.cfg"}) ==
          static_cast<int>(ErrorCode::kConfig));
}
