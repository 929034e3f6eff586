// Copyright 2026 The cpt4d Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "cpt4d/trainer.hpp"
#include "test_support.hpp"

using namespace cpt4d;

namespace {

struct MiniSetup {
  SliceDataset train;
  SliceDataset val;
  SurrogateSignal signal;
};

// Small phantom acquisition shared by the trainer tests.
MiniSetup mini_setup() {
  auto spec = default_phantom();
  auto motion = motion_for(spec);
  BreathSpec bs;
  bs.duration_s = 60;
  BreathModel breath{bs};
  AcquireConfig acfg;
  acfg.n_coronal_positions = 6;
  acfg.n_sweeps = 12;
  acfg.coronal_y0 = 38;
  acfg.coronal_stride = 4;
  auto ds = acquire(spec, motion, breath, acfg);
  MiniSetup s;
  s.signal = surrogate_for_dataset(ds, TrackerConfig{}, 11, 12);
  auto [train_ds, val_ds] = split(ds, 11, 12);
  s.train = std::move(train_ds);
  s.val = std::move(val_ds);
  while (!s.val.records.empty() &&
         s.val.records.back().timestamp > s.signal.timestamps.back())
    s.val.records.pop_back();
  return s;
}

TrainConfig mini_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.meta_batch = 4;
  cfg.points_per_batch = 600;
  cfg.lr = 3e-4;  // small nets tolerate a faster schedule
  cfg.lambda = 0.05;
  cfg.tmn_depth = 3;
  cfg.tmn_width = 32;
  cfg.tmn_omega0 = 7;
  cfg.san_depth = 3;
  cfg.san_width = 48;
  cfg.seed = seed;
  cfg.checkpoint_every = 50;
  return cfg;
}

// Canonical anatomy render on a coarse normalized grid.
std::vector<double> canonical_render(const AnatomyNetwork<double>& a) {
  const int n = 10;
  Mat<double> coords(n * n * n, 3);
  int r = 0;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i, ++r) {
        coords.at(r, 0) = normalized_coord(i, n);
        coords.at(r, 1) = normalized_coord(j, n);
        coords.at(r, 2) = normalized_coord(k, n);
      }
  return intensity(a, coords);
}

}  // namespace

TEST_CASE("zero epochs returns fresh networks and an empty log") {
  auto s = mini_setup();
  auto cfg = mini_config(1);
  cfg.epochs = 0;
  auto res = train(s.train, s.signal, cfg);
  REQUIRE(res.log.rows.empty());
  REQUIRE(res.motion_adam.step == 0);
  auto fresh = make_motion_network<double>(cfg.tmn_depth, cfg.tmn_width,
                                           cfg.tmn_omega0,
                                           cfg.tmn_omega_hidden,
                                           mix_seed(cfg.seed, 0x7107ull));
  REQUIRE(res.motion.core.layers[0].w.d == fresh.core.layers[0].w.d);
}

TEST_CASE("training is bit-deterministic for a fixed seed") {
  auto s = mini_setup();
  auto cfg = mini_config(7);
  cfg.epochs = 30;
  auto a = train(s.train, s.signal, cfg);
  auto b = train(s.train, s.signal, cfg);
  for (int l = 0; l < a.motion.core.depth(); ++l) {
    REQUIRE(a.motion.core.layers[l].w.d == b.motion.core.layers[l].w.d);
    REQUIRE(a.motion.core.layers[l].b == b.motion.core.layers[l].b);
  }
  for (int l = 0; l < a.anatomy.core.depth(); ++l) {
    REQUIRE(a.anatomy.core.layers[l].w.d == b.anatomy.core.layers[l].w.d);
    REQUIRE(a.anatomy.core.layers[l].b == b.anatomy.core.layers[l].b);
  }
  REQUIRE(a.log.rows.size() == b.log.rows.size());
  for (size_t i = 0; i < a.log.rows.size(); ++i) {
    REQUIRE(a.log.rows[i].loss.l_total == b.log.rows[i].loss.l_total);
  }
  // A different seed trains a different model.
  cfg.seed = 8;
  auto c = train(s.train, s.signal, cfg);
  REQUIRE(a.motion.core.layers[0].w.d != c.motion.core.layers[0].w.d);
}

TEST_CASE("photometric loss drops within 200 steps for five seeds") {
  auto s = mini_setup();
  for (std::uint64_t seed : {11u, 12u, 13u, 14u, 15u}) {
    auto cfg = mini_config(seed);
    auto res = train(s.train, s.signal, cfg);
    REQUIRE(res.log.rows.size() == 200);
    const double first = res.log.rows.front().loss.l_photo;
    const double last = res.log.rows.back().loss.l_photo;
    INFO("seed " << seed << ": " << first << " -> " << last);
    REQUIRE(last < first);
  }
}

TEST_CASE("log rows are strictly increasing and satisfy the identity") {
  auto s = mini_setup();
  auto cfg = mini_config(3);
  cfg.epochs = 40;
  auto res = train(s.train, s.signal, cfg);
  long prev = 0;
  for (const auto& r : res.log.rows) {
    REQUIRE(r.step > prev);
    prev = r.step;
    REQUIRE(r.loss.l_total ==
            r.loss.l_photo + r.loss.lambda * r.loss.l_jacdet);
    REQUIRE(r.loss.n_points == cfg.meta_batch * cfg.points_per_batch);
  }
  REQUIRE(res.log.skipped_records == 1);  // the pre-navigator coronal slice
}

TEST_CASE("anatomy refinement settles across the final checkpoints") {
  auto s = mini_setup();
  auto cfg = mini_config(21);
  cfg.epochs = 300;
  cfg.checkpoint_every = 100;
  std::vector<std::vector<double>> renders;
  CheckpointSink<double> sink = [&](long, const TrainResult<double>& r) {
    renders.push_back(canonical_render(r.anatomy));
  };
  train(s.train, s.signal, cfg, sink);
  REQUIRE(renders.size() == 3);
  auto mad = [](const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0;
    for (size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
    return acc / a.size();
  };
  const double d12 = mad(renders[0], renders[1]);
  const double d23 = mad(renders[1], renders[2]);
  INFO("checkpoint deltas " << d12 << " -> " << d23);
  REQUIRE(d23 < d12);
}

TEST_CASE("checkpoint sink fires on schedule") {
  auto s = mini_setup();
  auto cfg = mini_config(5);
  cfg.epochs = 130;
  cfg.checkpoint_every = 50;
  std::vector<long> steps;
  CheckpointSink<double> sink = [&](long step, const TrainResult<double>&) {
    steps.push_back(step);
  };
  train(s.train, s.signal, cfg, sink);
  REQUIRE(steps == std::vector<long>{50, 100, 130});
}

TEST_CASE("ablation table shapes and the identity row") {
  auto s = mini_setup();
  auto cfg = mini_config(9);
  cfg.epochs = 60;

  auto rows = ablate(s.train, s.val, s.signal, cfg, AblationAxis::kWidth,
                     {24}, TrackerConfig{});
  REQUIRE(rows.size() == 1);
  REQUIRE(rows[0].value == 24);
  REQUIRE(std::isfinite(rows[0].val_mae));
  REQUIRE(std::isfinite(rows[0].val_mse));

  // data_fraction = 1.0 reproduces the plain run's metrics exactly.
  auto base = train(s.train, s.signal, cfg);
  auto base_rep =
      evaluate_split(base.motion, base.anatomy, s.val, s.signal,
                     TrackerConfig{});
  auto frac_rows = ablate(s.train, s.val, s.signal, cfg,
                          AblationAxis::kDataFraction, {1.0}, TrackerConfig{});
  REQUIRE(frac_rows[0].val_mae == base_rep.mae_mean);
  REQUIRE(frac_rows[0].val_mse == base_rep.mse_mean);

  REQUIRE_THROWS_AS(ablate(s.train, s.val, s.signal, cfg,
                           AblationAxis::kDepth, {0.5}, TrackerConfig{}),
                    Error);
}

TEST_CASE("invalid configurations are rejected") {
  auto s = mini_setup();
  auto cfg = mini_config(1);
  cfg.lambda = -1;
  REQUIRE_THROWS_AS(train(s.train, s.signal, cfg), Error);
  cfg = mini_config(1);
  cfg.data_fraction = 0;
  REQUIRE_THROWS_AS(train(s.train, s.signal, cfg), Error);
  cfg = mini_config(1);
  cfg.precision = "f16";
  REQUIRE_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("float32 fast mode trains and stays finite") {
  auto s = mini_setup();
  auto cfg = mini_config(31);
  cfg.epochs = 40;
  auto res = train<float>(s.train, s.signal, cfg);
  REQUIRE(res.log.rows.size() == 40);
  for (const auto& r : res.log.rows) REQUIRE(std::isfinite(r.loss.l_total));
  auto res2 = train<float>(s.train, s.signal, cfg);
  REQUIRE(res.anatomy.core.layers[0].w.d == res2.anatomy.core.layers[0].w.d);
}
