// Copyright 2026 The cpt4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Command-line pipeline: phantom -> acquire -> surrogate -> train ->
// reconstruct / baseline -> evaluate, plus the ablation harness. Every
// command is idempotent for a fixed config and seed and writes its fully
// resolved configuration next to its outputs. The ground-truth sidecar is
// written during acquisition and consumed only by evaluation.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "cpt4d/checkpoint.hpp"
#include "cpt4d/config.hpp"
#include "cpt4d/metrics.hpp"
#include "cpt4d/phantom.hpp"
#include "cpt4d/reconstructor.hpp"
#include "cpt4d/trainer.hpp"

namespace cpt4d::cli {

namespace fs = std::filesystem;

inline PhantomSpec phantom_from(const RunConfig& cfg) {
  PhantomSpec s;
  s.nx = static_cast<int>(cfg.get_long("phantom_nx"));
  s.ny = static_cast<int>(cfg.get_long("phantom_ny"));
  s.nz = static_cast<int>(cfg.get_long("phantom_nz"));
  s.sx = cfg.get_double("phantom_sx");
  s.sy = cfg.get_double("phantom_sy");
  s.sz = cfg.get_double("phantom_sz");
  s.seed = cfg.get_u64("phantom_seed");
  s.antialias = cfg.get_bool("phantom_antialias");
  s.liver_edge_mm = cfg.get_double("phantom_liver_edge_mm");
  s.vessels_per_lung = static_cast<int>(cfg.get_long("phantom_vessels_per_lung"));
  finalize_phantom(s);
  return s;
}

inline GroundTruthMotion motion_from(const RunConfig& cfg,
                                     const PhantomSpec& spec) {
  GroundTruthMotion m = motion_for(spec);
  m.dz_mm = cfg.get_double("motion_dz_mm");
  m.decay_mm = cfg.get_double("motion_decay_mm");
  m.ap_coupling = cfg.get_double("motion_ap_coupling");
  return m;
}

inline BreathSpec breath_from(const RunConfig& cfg, long n_records) {
  BreathSpec b;
  b.period_s = cfg.get_double("breath_period_s");
  b.period_jitter = cfg.get_double("breath_period_jitter");
  b.depth_jitter = cfg.get_double("breath_depth_jitter");
  b.drift = cfg.get_double("breath_drift");
  b.dt_s = cfg.get_double("breath_dt_s");
  b.seed = cfg.get_u64("breath_seed");
  b.duration_s = cfg.get_double("breath_duration_s");
  if (b.duration_s <= 0) {
    b.duration_s = n_records * b.dt_s + 8 * b.period_s;
  }
  return b;
}

inline AcquireConfig acquire_from(const RunConfig& cfg) {
  AcquireConfig a;
  a.n_coronal_positions = static_cast<int>(cfg.get_long("acq_positions"));
  a.n_sweeps = static_cast<int>(cfg.get_long("acq_sweeps"));
  a.coronal_y0 = static_cast<int>(cfg.get_long("acq_y0"));
  a.coronal_stride = static_cast<int>(cfg.get_long("acq_stride"));
  a.navigator_x = static_cast<int>(cfg.get_long("acq_navigator_x"));
  return a;
}

inline TrackerConfig tracker_from(const RunConfig& cfg) {
  TrackerConfig t;
  t.roi_row_min = static_cast<int>(cfg.get_long("tracker_roi_min"));
  t.roi_row_max = static_cast<int>(cfg.get_long("tracker_roi_max"));
  t.min_gradient = cfg.get_double("tracker_min_gradient");
  if (!cfg.get_string("tracker_columns").empty())
    t.columns = cfg.get_int_list("tracker_columns");
  return t;
}

inline TrainConfig train_from(const RunConfig& cfg) {
  TrainConfig t;
  t.epochs = cfg.get_long("train_epochs");
  t.meta_batch = static_cast<int>(cfg.get_long("train_meta_batch"));
  t.points_per_batch = static_cast<int>(cfg.get_long("train_points"));
  t.lr = cfg.get_double("train_lr");
  t.beta1 = cfg.get_double("train_beta1");
  t.beta2 = cfg.get_double("train_beta2");
  t.eps = cfg.get_double("train_eps");
  t.lambda = cfg.get_double("train_lambda");
  t.tmn_depth = static_cast<int>(cfg.get_long("train_tmn_depth"));
  t.tmn_width = static_cast<int>(cfg.get_long("train_tmn_width"));
  t.tmn_omega0 = cfg.get_double("train_tmn_omega0");
  t.tmn_omega_hidden = cfg.get_double("train_tmn_omega_hidden");
  t.san_depth = static_cast<int>(cfg.get_long("train_san_depth"));
  t.san_width = static_cast<int>(cfg.get_long("train_san_width"));
  t.san_omega0 = cfg.get_double("train_san_omega0");
  t.san_omega_hidden = cfg.get_double("train_san_omega_hidden");
  t.data_fraction = cfg.get_double("train_data_fraction");
  t.seed = cfg.get_u64("seed");
  t.checkpoint_every = cfg.get_long("train_checkpoint_every");
  t.precision = cfg.get_string("train_precision");
  t.validate();
  return t;
}

inline fs::path outdir(const RunConfig& cfg, const std::string& part) {
  fs::path d = fs::path(cfg.get_string("workdir")) / part;
  fs::create_directories(d);
  return d;
}

inline int cmd_phantom(const RunConfig& cfg) {
  auto spec = phantom_from(cfg);
  auto motion = motion_from(cfg, spec);
  auto dir = outdir(cfg, "phantom");
  auto amplitudes = cfg.get_double_list("phantom_amplitudes");
  require(!amplitudes.empty(), ErrorCode::kConfig,
          "phantom: no amplitudes requested");

  std::ofstream list(dir / "volumes.csv");
  list << "index,amplitude,path\n";
  for (size_t i = 0; i < amplitudes.size(); ++i) {
    auto vol = render_volume(spec, motion, amplitudes[i]);
    const std::string name = strprintf("phantom_%03zu.cvol", i);
    save_volume((dir / name).string(), vol);
    list << i << "," << format_g17(amplitudes[i]) << "," << name << "\n";
  }

  std::ofstream sf(dir / "phantom.spec");
  sf << "dims " << spec.nx << " " << spec.ny << " " << spec.nz << "\n";
  sf << "spacing " << format_g17(spec.sx) << " " << format_g17(spec.sy) << " "
     << format_g17(spec.sz) << "\n";
  sf << "seed " << spec.seed << "\n";
  sf << "antialias " << (spec.antialias ? 1 : 0) << "\n";
  auto ell = [&](const char* name, const Ellipsoid& e) {
    sf << name << " center " << format_g17(e.c.x) << " " << format_g17(e.c.y)
       << " " << format_g17(e.c.z) << " semi " << format_g17(e.a.x) << " "
       << format_g17(e.a.y) << " " << format_g17(e.a.z) << "\n";
  };
  ell("body", spec.body);
  ell("lung_right", spec.lung_right);
  ell("lung_left", spec.lung_left);
  ell("liver", spec.liver);
  sf << "vessels " << spec.vessels.size() << "\n";
  cfg.save((dir / "resolved.cfg").string());
  std::cout << "phantom: wrote " << amplitudes.size() << " volumes to " << dir
            << "\n";
  return 0;
}

inline int cmd_acquire(const RunConfig& cfg) {
  auto spec = phantom_from(cfg);
  auto motion = motion_from(cfg, spec);
  auto acq = acquire_from(cfg);
  const long n_records = 2L * acq.n_coronal_positions * acq.n_sweeps;
  BreathModel breath{breath_from(cfg, n_records)};
  auto ds = acquire(spec, motion, breath, acq);

  auto dir = outdir(cfg, "dataset");
  save_dataset(dir.string(), ds);

  auto [num, den] = cfg.get_fraction("split_fraction");
  auto [train_ds, val_ds] = split(ds, num, den);
  const double coverage = validation_amplitude_coverage(train_ds, val_ds);
  if (coverage < 0.6) {
    std::cerr << "warning: validation amplitudes cover only "
              << format_g9(coverage) << " of the training range\n";
  }

  // Oracle parameters for evaluation; training never reads this file.
  std::ofstream sc(dir / "groundtruth.sidecar");
  sc << "motion_dz_mm " << format_g17(motion.dz_mm) << "\n";
  sc << "motion_decay_mm " << format_g17(motion.decay_mm) << "\n";
  sc << "motion_ap_coupling " << format_g17(motion.ap_coupling) << "\n";
  sc << "breath_seed " << cfg.get_u64("breath_seed") << "\n";
  sc << "phantom_seed " << spec.seed << "\n";
  sc << "validation_amplitude_coverage " << format_g17(coverage) << "\n";
  cfg.save((dir / "resolved.cfg").string());
  std::cout << "acquire: " << ds.records.size() << " records ("
            << train_ds.records.size() << " train / " << val_ds.records.size()
            << " val), amplitude coverage " << format_g9(coverage) << "\n";
  return 0;
}

inline int cmd_surrogate(const RunConfig& cfg) {
  auto ds = load_dataset((fs::path(cfg.get_string("workdir")) / "dataset").string());
  auto [num, den] = cfg.get_fraction("split_fraction");
  auto sig = surrogate_for_dataset(ds, tracker_from(cfg), num, den);
  auto dir = outdir(cfg, "surrogate");
  save_signal((dir / "signal.csv").string(), sig);
  cfg.save((dir / "resolved.cfg").string());
  std::cout << "surrogate: tracked " << sig.raw.size()
            << " navigators, raw range [" << format_g9(sig.raw_min) << ", "
            << format_g9(sig.raw_max) << "]\n";
  return 0;
}

template <class T>
int run_train(const RunConfig& cfg, const SliceDataset& train_ds,
              const SurrogateSignal& sig) {
  auto dir = outdir(cfg, "model");
  const TrainConfig tc = train_from(cfg);
  CheckpointSink<T> sink = [&](long step, const TrainResult<T>& r) {
    nn::save_checkpoint(
        (dir / strprintf("ckpt_tmn_%06ld.ckpt", step)).string(),
        r.motion.core, r.motion_adam);
    nn::save_checkpoint(
        (dir / strprintf("ckpt_san_%06ld.ckpt", step)).string(),
        r.anatomy.core, r.anatomy_adam);
    std::cout << "step " << step << "/" << tc.epochs << " l_photo="
              << format_g9(r.log.rows.back().loss.l_photo) << " l_jacdet="
              << format_g9(r.log.rows.back().loss.l_jacdet) << "\n";
  };
  auto res = train<T>(train_ds, sig, tc, sink);

  nn::save_checkpoint((dir / "tmn.ckpt").string(), res.motion.core,
                      res.motion_adam);
  nn::save_checkpoint((dir / "san.ckpt").string(), res.anatomy.core,
                      res.anatomy_adam);
  ModelManifest manifest;
  manifest.geom = train_ds.geom;
  manifest.surrogate_raw_min = sig.raw_min;
  manifest.surrogate_raw_max = sig.raw_max;
  manifest.dvf_units = DvfUnits::kNormalized;
  manifest.precision = tc.precision;
  manifest.navigator_x = static_cast<int>(cfg.get_long("acq_navigator_x"));
  save_manifest((dir / "model.manifest").string(), manifest);
  save_train_log((dir / "trainlog.csv").string(), res.log);
  cfg.save((dir / "resolved.cfg").string());
  std::cout << "train: " << tc.epochs << " steps in "
            << format_g9(res.log.total_wall_s) << " s\n";
  return 0;
}

inline int cmd_train(const RunConfig& cfg) {
  auto ds = load_dataset((fs::path(cfg.get_string("workdir")) / "dataset").string());
  auto sig = load_signal(
      (fs::path(cfg.get_string("workdir")) / "surrogate" / "signal.csv").string());
  auto [num, den] = cfg.get_fraction("split_fraction");
  auto [train_ds, val_ds] = split(ds, num, den);
  (void)val_ds;
  if (cfg.get_string("train_precision") == "f32") {
    return run_train<float>(cfg, train_ds, sig);
  }
  return run_train<double>(cfg, train_ds, sig);
}

template <class T>
struct LoadedModel {
  MotionNetwork<T> motion;
  AnatomyNetwork<T> anatomy;
  ModelManifest manifest;
};

template <class T>
LoadedModel<T> load_model(const std::string& model_dir) {
  LoadedModel<T> m;
  m.manifest = load_manifest((fs::path(model_dir) / "model.manifest").string());
  m.motion.core =
      nn::load_checkpoint<T>((fs::path(model_dir) / "tmn.ckpt").string()).params;
  m.anatomy.core =
      nn::load_checkpoint<T>((fs::path(model_dir) / "san.ckpt").string()).params;
  return m;
}

inline StatePolicy clamp_policy_from(const RunConfig& cfg) {
  const std::string& s = cfg.get_string("recon_clamp");
  if (s == "warn") return StatePolicy::kClampWarn;
  if (s == "strict") return StatePolicy::kStrict;
  if (s == "passthrough") return StatePolicy::kPassthrough;
  fail(ErrorCode::kConfig, "recon_clamp must be warn, strict or passthrough");
}

template <class T>
int run_reconstruct(const RunConfig& cfg) {
  auto model = load_model<T>(
      (fs::path(cfg.get_string("workdir")) / "model").string());
  auto dir = outdir(cfg, "recon");
  auto states = cfg.get_double_list("recon_states");
  require(!states.empty(), ErrorCode::kConfig, "recon: no states requested");
  const std::string kind_str = cfg.get_string("recon_state_kind");
  require(kind_str == "norm01" || kind_str == "norm11", ErrorCode::kConfig,
          "recon_state_kind must be norm01 or norm11");

  std::ofstream list(dir / "states.csv");
  list << "index,state,kind,flagged\n";
  std::ofstream timing(dir / "timing.csv");
  timing << "index,wall_ms\n";
  for (size_t i = 0; i < states.size(); ++i) {
    ReconRequest req;
    req.state = states[i];
    req.state_kind =
        kind_str == "norm01" ? StateKind::kNorm01 : StateKind::kNorm11;
    req.batch_points = static_cast<int>(cfg.get_long("recon_batch_points"));
    req.policy = clamp_policy_from(cfg);
    long flagged = 0;
    const auto t0 = std::chrono::steady_clock::now();
    auto vol = reconstruct(model.motion, model.anatomy, model.manifest, req,
                           &flagged);
    const auto t1 = std::chrono::steady_clock::now();
    vol.seed = cfg.get_u64("seed");
    const std::string name = strprintf("recon_%03zu.cvol", i);
    save_volume((dir / name).string(), vol);
    list << i << "," << format_g17(states[i]) << "," << kind_str << ","
         << flagged << "\n";
    timing << i << ","
           << format_g9(std::chrono::duration<double, std::milli>(t1 - t0)
                            .count())
           << "\n";
    if (cfg.get_bool("recon_export_mip")) {
      auto mip = mip_anterior_posterior(vol);
      save_pgm((dir / strprintf("recon_%03zu_mip.pgm", i)).string(),
               mip.pixels.data(), mip.rows, mip.cols);
    }
    if (cfg.get_bool("recon_export_pgm")) {
      fs::create_directories(dir / strprintf("recon_%03zu_pgm", i));
      for (int k = 0; k < vol.nz; ++k) {
        SliceGrid g(vol.ny, vol.nx, vol.sy, vol.sx);
        for (int j = 0; j < vol.ny; ++j)
          for (int ii = 0; ii < vol.nx; ++ii) g.at(j, ii) = vol.at(ii, j, k);
        save_pgm((dir / strprintf("recon_%03zu_pgm", i) /
                  strprintf("slice_z%03d.pgm", k))
                     .string(),
                 g.pixels.data(), g.rows, g.cols);
      }
    }
  }
  cfg.save((dir / "resolved.cfg").string());
  std::cout << "reconstruct: wrote " << states.size() << " volumes\n";
  return 0;
}

inline int cmd_reconstruct(const RunConfig& cfg) {
  auto manifest = load_manifest(
      (fs::path(cfg.get_string("workdir")) / "model" / "model.manifest").string());
  if (manifest.precision == "f32") return run_reconstruct<float>(cfg);
  return run_reconstruct<double>(cfg);
}

inline int cmd_baseline(const RunConfig& cfg) {
  auto ds = load_dataset((fs::path(cfg.get_string("workdir")) / "dataset").string());
  auto sig = load_signal(
      (fs::path(cfg.get_string("workdir")) / "surrogate" / "signal.csv").string());
  auto [num, den] = cfg.get_fraction("split_fraction");
  auto [train_ds, val_ds] = split(ds, num, den);
  (void)val_ds;
  SortingConfig sc;
  sc.n_bins = static_cast<int>(cfg.get_long("sort_bins"));
  auto dir = outdir(cfg, "baseline");
  GapReport all;
  for (int b = 0; b < sc.n_bins; ++b) {
    auto [vol, gaps] = reconstruct_baseline(train_ds, sig, sc, b);
    vol.seed = cfg.get_u64("seed");
    save_volume((dir / strprintf("bin_%02d.cvol", b)).string(), vol);
    for (auto& e : gaps.entries) all.entries.push_back(e);
    all.bins_built += 1;
  }
  save_gap_report((dir / "gap_report.csv").string(), all);
  cfg.save((dir / "resolved.cfg").string());
  std::cout << "baseline: " << sc.n_bins << " bins, " << all.entries.size()
            << " borrowed slices\n";
  return 0;
}

inline void write_summary(const std::string& path, const EvalReport& inr,
                          const EvalReport& base, const GapReport& gaps) {
  std::ofstream f(path);
  require(f.good(), ErrorCode::kIo, "cannot write summary: " + path);
  auto pm = [](double m, double s) {
    return strprintf("%.4f+-%.4f", m, s);
  };
  f << "validation summary (" << inr.slices.size() << " slices)\n\n";
  f << strprintf("%-22s %-20s %-20s\n", "metric", "traditional_sorting",
                 "inr");
  f << strprintf("%-22s %-20s %-20s\n", "image_mae",
                 pm(base.mae_mean, base.mae_std).c_str(),
                 pm(inr.mae_mean, inr.mae_std).c_str());
  f << strprintf("%-22s %-20s %-20s\n", "image_mse",
                 pm(base.mse_mean, base.mse_std).c_str(),
                 pm(inr.mse_mean, inr.mse_std).c_str());
  f << strprintf("%-22s %-20s %-20s\n", "image_psnr_db",
                 pm(base.psnr_mean, base.psnr_std).c_str(),
                 pm(inr.psnr_mean, inr.psnr_std).c_str());
  f << strprintf("%-22s %-20s %-20s\n", "image_ssim",
                 pm(base.ssim_mean, base.ssim_std).c_str(),
                 pm(inr.ssim_mean, inr.ssim_std).c_str());
  auto traj = [](const EvalReport& r) {
    return r.has_trajectory ? strprintf("%.4f", r.trajectory_mae)
                            : std::string("untracked");
  };
  auto pat = [](const EvalReport& r) {
    return r.has_trajectory ? strprintf("%.4f", r.trajectory_pattern)
                            : std::string("untracked");
  };
  f << strprintf("%-22s %-20s %-20s\n", "trajectory_mae", traj(base).c_str(),
                 traj(inr).c_str());
  f << strprintf("%-22s %-20s %-20s\n", "trajectory_pattern",
                 pat(base).c_str(), pat(inr).c_str());
  f << strprintf("%-22s %-20ld %-20ld\n", "out_of_range_states",
                 base.out_of_range_states, inr.out_of_range_states);
  f << "\nbaseline borrowed slices: " << gaps.entries.size() << " across "
    << gaps.bins_built << " bins\n";
}

template <class T>
int run_evaluate(const RunConfig& cfg) {
  const fs::path wd(cfg.get_string("workdir"));
  auto ds = load_dataset((wd / "dataset").string());
  auto sig = load_signal((wd / "surrogate" / "signal.csv").string());
  auto model = load_model<T>((wd / "model").string());
  require(model.manifest.geom.nx == ds.geom.nx &&
              model.manifest.geom.ny == ds.geom.ny &&
              model.manifest.geom.nz == ds.geom.nz,
          ErrorCode::kGeometry, "evaluate: model/dataset geometry mismatch");
  // Sidecar provenance (evaluation may see the oracle; training never does).
  {
    std::ifstream sc(wd / "dataset" / "groundtruth.sidecar");
    require(sc.good(), ErrorCode::kMissingFile,
            "evaluate: missing ground-truth sidecar");
  }
  auto [num, den] = cfg.get_fraction("split_fraction");
  auto [train_ds, val_ds] = split(ds, num, den);
  auto tracker = tracker_from(cfg);

  auto inr = evaluate_split(model.motion, model.anatomy, val_ds, sig, tracker);
  SortingConfig sc;
  sc.n_bins = static_cast<int>(cfg.get_long("sort_bins"));
  GapReport gaps;
  auto base = evaluate_baseline(train_ds, val_ds, sig, sc, tracker, &gaps);

  auto dir = outdir(cfg, "eval");
  save_eval_report((dir / "inr_eval.csv").string(), inr);
  save_eval_report((dir / "baseline_eval.csv").string(), base);
  write_summary((dir / "summary.txt").string(), inr, base, gaps);
  cfg.save((dir / "resolved.cfg").string());
  std::cout << "evaluate: inr mae " << format_g9(inr.mae_mean)
            << " vs sorting mae " << format_g9(base.mae_mean) << "\n";
  return 0;
}

inline int cmd_evaluate(const RunConfig& cfg) {
  auto manifest = load_manifest(
      (fs::path(cfg.get_string("workdir")) / "model" / "model.manifest").string());
  if (manifest.precision == "f32") return run_evaluate<float>(cfg);
  return run_evaluate<double>(cfg);
}

inline int cmd_ablate(const RunConfig& cfg, const std::string& axis_name,
                      const std::vector<double>& values) {
  const fs::path wd(cfg.get_string("workdir"));
  auto ds = load_dataset((wd / "dataset").string());
  auto sig = load_signal((wd / "surrogate" / "signal.csv").string());
  auto [num, den] = cfg.get_fraction("split_fraction");
  auto [train_ds, val_ds] = split(ds, num, den);
  const AblationAxis axis = ablation_axis_from_name(axis_name);
  auto rows = ablate(train_ds, val_ds, sig, train_from(cfg), axis, values,
                     tracker_from(cfg));
  auto dir = outdir(cfg, "ablation");
  save_ablation_table((dir / (axis_name + ".csv")).string(), axis, rows);
  cfg.save((dir / "resolved.cfg").string());
  std::cout << "ablate: " << rows.size() << " rows on axis " << axis_name
            << "\n";
  return 0;
}

}  // namespace cpt4d::cli
