// Copyright 2026 The cpt4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Joint end-to-end optimization of the motion and anatomy networks from
// slice samples and surrogate states. One step ("epoch") draws meta_batch
// slice records uniformly from the training prefix, samples points from
// each, accumulates gradients across the meta-batch, and applies one Adam
// update per network. The meta-batch evaluates in parallel; gradients are
// reduced in fixed slot order, so results do not depend on thread count.

#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "cpt4d/acquisition.hpp"
#include "cpt4d/losses.hpp"
#include "cpt4d/metrics.hpp"
#include "cpt4d/networks.hpp"
#include "cpt4d/parallel.hpp"
#include "cpt4d/surrogate.hpp"

namespace cpt4d {

struct TrainConfig {
  long epochs = 2000;  // optimization steps; 10000 reproduces the full setup
  int meta_batch = 8;
  int points_per_batch = 10000;
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double lambda = 0.05;
  int tmn_depth = 4;
  int tmn_width = 256;
  double tmn_omega0 = 30;
  double tmn_omega_hidden = 1;
  int san_depth = 5;
  int san_width = 512;
  double san_omega0 = 30;
  double san_omega_hidden = 1;
  double data_fraction = 1.0;  // temporal prefix of the training split
  std::uint64_t seed = 42;
  long checkpoint_every = 200;
  std::string precision = "f64";

  void validate() const {
    require(epochs >= 0 && meta_batch >= 1 && points_per_batch >= 1,
            ErrorCode::kConfig, "train: counts must be positive");
    require(lr > 0 && beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1,
            ErrorCode::kConfig, "train: bad optimizer constants");
    require(lambda >= 0, ErrorCode::kConfig, "train: lambda must be >= 0");
    require(data_fraction > 0 && data_fraction <= 1, ErrorCode::kConfig,
            "train: data_fraction must lie in (0, 1]");
    require(tmn_depth >= 1 && tmn_width >= 1 && san_depth >= 1 &&
                san_width >= 1,
            ErrorCode::kConfig, "train: network dims must be positive");
    require(checkpoint_every >= 1, ErrorCode::kConfig,
            "train: checkpoint_every must be positive");
    require(precision == "f64" || precision == "f32", ErrorCode::kConfig,
            "train: precision must be f64 or f32");
  }
};

struct TrainLogRow {
  long step = 0;
  LossReport loss;
  double wall_ms = 0;
};

struct TrainLog {
  long checkpoint_every = 0;
  std::vector<TrainLogRow> rows;
  double total_wall_s = 0;
  long skipped_records = 0;  // training records without a defined state
};

template <class T>
struct TrainResult {
  MotionNetwork<T> motion;
  AnatomyNetwork<T> anatomy;
  nn::AdamState<T> motion_adam;
  nn::AdamState<T> anatomy_adam;
  TrainLog log;
};

// Invoked after the optimizer step whenever step % checkpoint_every == 0
// and at the final step.
template <class T>
using CheckpointSink = std::function<void(long step, const TrainResult<T>&)>;

template <class T = double>
TrainResult<T> train(const SliceDataset& train_ds,
                     const SurrogateSignal& signal, const TrainConfig& cfg,
                     const CheckpointSink<T>& sink = {}) {
  cfg.validate();
  require(!train_ds.records.empty(), ErrorCode::kConfig,
          "train: empty training split");

  TrainResult<T> res;
  res.motion = make_motion_network<T>(cfg.tmn_depth, cfg.tmn_width,
                                      cfg.tmn_omega0, cfg.tmn_omega_hidden,
                                      mix_seed(cfg.seed, 0x7107ull));
  res.anatomy = make_anatomy_network<T>(cfg.san_depth, cfg.san_width,
                                        cfg.san_omega0, cfg.san_omega_hidden,
                                        mix_seed(cfg.seed, 0x5a07ull));
  nn::AdamConfig acfg{cfg.lr, cfg.beta1, cfg.beta2, cfg.eps};
  res.motion_adam = nn::make_adam(res.motion.core, acfg);
  res.anatomy_adam = nn::make_adam(res.anatomy.core, acfg);
  res.log.checkpoint_every = cfg.checkpoint_every;

  // Training pool: the data_fraction prefix restricted to records whose
  // states the signal defines (the very first coronal slice precedes any
  // navigator sample and is skipped).
  const long prefix = std::max<long>(
      1, static_cast<long>(std::floor(train_ds.records.size() *
                                      cfg.data_fraction)));
  std::vector<const SliceRecord*> pool_records;
  std::vector<double> pool_states;
  for (long i = 0; i < prefix; ++i) {
    const SliceRecord& r = train_ds.records[i];
    if (r.timestamp < signal.timestamps.front() ||
        r.timestamp > signal.timestamps.back()) {
      ++res.log.skipped_records;
      continue;
    }
    pool_records.push_back(&r);
    pool_states.push_back(state_for_record(signal, r));
  }
  require(!pool_records.empty(), ErrorCode::kConfig,
          "train: no records with defined surrogate states");

  if (cfg.epochs == 0) return res;

  Rng draw_rng(mix_seed(cfg.seed, 0xd4a3ull));
  std::vector<LossReport> slot_reports(cfg.meta_batch);
  std::vector<PairGradients<T>> slot_grads;
  for (int s = 0; s < cfg.meta_batch; ++s)
    slot_grads.push_back(
        PairGradients<T>::zeros_like(res.motion, res.anatomy));
  auto total = PairGradients<T>::zeros_like(res.motion, res.anatomy);

  const auto t_begin = std::chrono::steady_clock::now();
  long last_checkpoint_step = -1;
  for (long step = 0; step < cfg.epochs; ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<int> picks(cfg.meta_batch);
    for (int s = 0; s < cfg.meta_batch; ++s)
      picks[s] = static_cast<int>(draw_rng.next_index(pool_records.size()));

    global_pool().run(cfg.meta_batch, [&](int slot) {
      const SliceRecord& rec = *pool_records[picks[slot]];
      auto [coords, gt] = sample_points<T>(
          rec, train_ds.geom, cfg.points_per_batch,
          mix_seed(cfg.seed, 0xba7c4ull + static_cast<std::uint64_t>(step),
                   static_cast<std::uint64_t>(slot)));
      for (auto& m : slot_grads[slot].motion.dw) m.fill(0);
      for (auto& b : slot_grads[slot].motion.db) std::fill(b.begin(), b.end(), T(0));
      for (auto& m : slot_grads[slot].anatomy.dw) m.fill(0);
      for (auto& b : slot_grads[slot].anatomy.db) std::fill(b.begin(), b.end(), T(0));
      slot_reports[slot] =
          total_loss(res.motion, res.anatomy, coords,
                     T(pool_states[picks[slot]]), gt, cfg.lambda,
                     &slot_grads[slot]);
    });

    // Sequential reduction in slot order; gradients are averaged so the
    // learning rate keeps its meaning independent of meta_batch.
    for (auto& m : total.motion.dw) m.fill(0);
    for (auto& b : total.motion.db) std::fill(b.begin(), b.end(), T(0));
    for (auto& m : total.anatomy.dw) m.fill(0);
    for (auto& b : total.anatomy.db) std::fill(b.begin(), b.end(), T(0));
    const T inv = T(1) / T(cfg.meta_batch);
    for (int s = 0; s < cfg.meta_batch; ++s)
      total.add_scaled(slot_grads[s], inv);

    LossReport step_loss;
    step_loss.lambda = cfg.lambda;
    for (int s = 0; s < cfg.meta_batch; ++s) {
      step_loss.l_photo += slot_reports[s].l_photo;
      step_loss.l_jacdet += slot_reports[s].l_jacdet;
      step_loss.n_points += slot_reports[s].n_points;
    }
    step_loss.l_photo /= cfg.meta_batch;
    step_loss.l_jacdet /= cfg.meta_batch;
    step_loss.l_total = step_loss.l_photo + cfg.lambda * step_loss.l_jacdet;
    if (!std::isfinite(step_loss.l_total)) {
      fail(ErrorCode::kDivergence,
           last_checkpoint_step >= 0
               ? strprintf("train: non-finite loss at step %ld; last good "
                           "checkpoint at step %ld",
                           step + 1, last_checkpoint_step)
               : strprintf("train: non-finite loss at step %ld before any "
                           "checkpoint",
                           step + 1));
    }

    nn::adam_step(res.motion.core, res.motion_adam, total.motion);
    nn::adam_step(res.anatomy.core, res.anatomy_adam, total.anatomy);

    const auto t1 = std::chrono::steady_clock::now();
    TrainLogRow row;
    row.step = step + 1;
    row.loss = step_loss;
    row.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    res.log.rows.push_back(row);

    if ((step + 1) % cfg.checkpoint_every == 0 || step + 1 == cfg.epochs) {
      last_checkpoint_step = step + 1;
      if (sink) sink(step + 1, res);
    }
  }
  res.log.total_wall_s = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - t_begin)
                             .count();
  return res;
}

// One CSV row per step: step, l_photo, l_jacdet, l_total, lambda, wall_ms.
inline void save_train_log(const std::string& path, const TrainLog& log) {
  std::ofstream f(path);
  require(f.good(), ErrorCode::kIo, "cannot write train log: " + path);
  f << "# checkpoint_every=" << log.checkpoint_every
    << " skipped_records=" << log.skipped_records << "\n";
  f << "step,l_photo,l_jacdet,l_total,lambda,wall_ms\n";
  for (const auto& r : log.rows) {
    f << r.step << "," << format_g17(r.loss.l_photo) << ","
      << format_g17(r.loss.l_jacdet) << "," << format_g17(r.loss.l_total)
      << "," << format_g17(r.loss.lambda) << "," << format_g9(r.wall_ms)
      << "\n";
  }
}

enum class AblationAxis { kOmega, kDepth, kWidth, kDataFraction };

inline AblationAxis ablation_axis_from_name(const std::string& s) {
  if (s == "omega") return AblationAxis::kOmega;
  if (s == "depth") return AblationAxis::kDepth;
  if (s == "width") return AblationAxis::kWidth;
  if (s == "data_fraction") return AblationAxis::kDataFraction;
  fail(ErrorCode::kConfig, "unknown ablation axis: " + s);
}

inline const char* ablation_axis_name(AblationAxis a) {
  switch (a) {
    case AblationAxis::kOmega: return "omega";
    case AblationAxis::kDepth: return "depth";
    case AblationAxis::kWidth: return "width";
    case AblationAxis::kDataFraction: return "data_fraction";
  }
  return "?";
}

struct AblationRow {
  double value = 0;
  double val_mae = 0;
  double val_mse = 0;
  double trajectory_mae = 0;
  bool has_trajectory = false;
};

// The axes target the motion network (the anatomy network keeps the base
// configuration); every run reuses the base seed so rows differ only in the
// swept value.
template <class T = double>
std::vector<AblationRow> ablate(const SliceDataset& train_ds,
                                const SliceDataset& val_ds,
                                const SurrogateSignal& signal,
                                const TrainConfig& base_cfg, AblationAxis axis,
                                const std::vector<double>& values,
                                const TrackerConfig& tracker) {
  require(!values.empty(), ErrorCode::kConfig, "ablate: no values given");
  std::vector<AblationRow> rows;
  for (double v : values) {
    TrainConfig cfg = base_cfg;
    switch (axis) {
      case AblationAxis::kOmega:
        require(v > 0, ErrorCode::kConfig, "ablate: omega must be positive");
        cfg.tmn_omega0 = v;
        break;
      case AblationAxis::kDepth:
        require(v >= 1 && v == std::floor(v), ErrorCode::kConfig,
                "ablate: depth must be a positive integer");
        cfg.tmn_depth = static_cast<int>(v);
        break;
      case AblationAxis::kWidth:
        require(v >= 1 && v == std::floor(v), ErrorCode::kConfig,
                "ablate: width must be a positive integer");
        cfg.tmn_width = static_cast<int>(v);
        break;
      case AblationAxis::kDataFraction:
        require(v > 0 && v <= 1, ErrorCode::kConfig,
                "ablate: data_fraction must lie in (0, 1]");
        cfg.data_fraction = v;
        break;
    }
    auto result = train<T>(train_ds, signal, cfg);
    auto rep = evaluate_split(result.motion, result.anatomy, val_ds, signal,
                              tracker);
    AblationRow row;
    row.value = v;
    row.val_mae = rep.mae_mean;
    row.val_mse = rep.mse_mean;
    row.trajectory_mae = rep.trajectory_mae;
    row.has_trajectory = rep.has_trajectory;
    rows.push_back(row);
  }
  return rows;
}

inline void save_ablation_table(const std::string& path, AblationAxis axis,
                                const std::vector<AblationRow>& rows) {
  std::ofstream f(path);
  require(f.good(), ErrorCode::kIo, "cannot write ablation table: " + path);
  f << "axis,value,val_mae,val_mse,trajectory_mae\n";
  for (const auto& r : rows) {
    f << ablation_axis_name(axis) << "," << format_g17(r.value) << ","
      << format_g17(r.val_mae) << "," << format_g17(r.val_mse) << ","
      << (r.has_trajectory ? format_g17(r.trajectory_mae)
                           : std::string("untracked"))
      << "\n";
  }
}

}  // namespace cpt4d
