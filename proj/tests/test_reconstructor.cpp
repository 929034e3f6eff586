// Copyright 2026 The cpt4d Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "cpt4d/reconstructor.hpp"
#include "test_support.hpp"

using namespace cpt4d;

namespace {

ModelManifest small_manifest() {
  ModelManifest m;
  m.geom = {24, 20, 16, 2, 2, 3.5};
  m.surrogate_raw_min = 20;
  m.surrogate_raw_max = 28;
  m.navigator_x = 16;
  return m;
}

MotionNetwork<double> constant_motion(double dx, double dy, double dz,
                                      nn::Act act) {
  MotionNetwork<double> m;
  nn::LayerParams<double> l;
  l.w.resize(3, 4);
  l.b = {dx, dy, dz};
  l.omega = 1.0;
  l.act = act;
  m.core.layers.push_back(l);
  m.core.revision = 5;
  return m;
}

// Synthetic dataset: constant-intensity slices encode (position, state).
SliceDataset synthetic_sorted_dataset(const std::vector<int>& positions,
                                      const std::vector<double>& states01,
                                      SurrogateSignal& sig_out) {
  SliceDataset ds;
  ds.geom = {24, 20, 16, 2, 2, 3.5};
  int index = 0;
  double t = 0;
  sig_out = SurrogateSignal{};
  for (double s : states01) {
    for (int p : positions) {
      SliceRecord r;
      r.index = index++;
      r.kind = SliceKind::kCoronal;
      r.plane_position = p;
      r.timestamp = t;
      r.amplitude_gt = s;
      r.pixels = SliceGrid(16, 24, 3.5, 2.0);
      for (auto& v : r.pixels.pixels)
        v = static_cast<float>(0.1 + 0.05 * p + 0.5 * s);
      ds.records.push_back(std::move(r));
      sig_out.timestamps.push_back(t);
      sig_out.norm11.push_back(2 * s - 1);
      sig_out.norm01.push_back(s);
      sig_out.raw.push_back(20 + 8 * s);
      t += 0.32;
    }
  }
  sig_out.raw_min = 20;
  sig_out.raw_max = 28;
  return ds;
}

}  // namespace

TEST_CASE("zeroed motion reconstructs the canonical template") {
  auto manifest = small_manifest();
  auto m = make_motion_network<double>(3, 12, 30, 1, 4);
  m.core.layers[2].w.fill(0);
  m.core.layers[2].b.assign(3, 0.0);
  auto a = make_anatomy_network<double>(3, 16, 30, 1, 5);

  ReconRequest req;
  req.state = 0.5;
  auto vol = reconstruct(m, a, manifest, req);

  const auto& g = manifest.geom;
  for (int k = 0; k < g.nz; k += 3) {
    for (int j = 0; j < g.ny; j += 3) {
      Mat<double> coords(g.nx, 3);
      for (int i = 0; i < g.nx; ++i) {
        coords.at(i, 0) = normalized_coord(i, g.nx);
        coords.at(i, 1) = normalized_coord(j, g.ny);
        coords.at(i, 2) = normalized_coord(k, g.nz);
      }
      auto vals = intensity(a, coords);
      for (int i = 0; i < g.nx; ++i)
        REQUIRE(vol.at(i, j, k) == static_cast<float>(vals[i]));
    }
  }
}

TEST_CASE("reconstruction is deterministic and chunk-size invariant") {
  auto manifest = small_manifest();
  auto m = make_motion_network<double>(3, 12, 7, 1, 7);
  auto a = make_anatomy_network<double>(4, 16, 30, 1, 8);

  ReconRequest req;
  req.state = 0.3;
  req.batch_points = 1000;
  auto v1 = reconstruct(m, a, manifest, req);
  auto v2 = reconstruct(m, a, manifest, req);
  REQUIRE(v1.voxels == v2.voxels);

  req.batch_points = 100000;
  auto v3 = reconstruct(m, a, manifest, req);
  REQUIRE(v1.voxels == v3.voxels);

  req.batch_points = 37;  // ragged chunking
  auto v4 = reconstruct(m, a, manifest, req);
  REQUIRE(v1.voxels == v4.voxels);
}

TEST_CASE("voxel-unit manifests rescale the displacement by 2/size") {
  auto manifest = small_manifest();
  const auto& g = manifest.geom;
  const double vx = 3.0, vy = -2.0, vz = 1.5;  // voxel units

  auto mv = constant_motion(vx, vy, vz, nn::Act::kLinear);
  auto mn = constant_motion(vx * 2.0 / g.nx, vy * 2.0 / g.ny, vz * 2.0 / g.nz,
                            nn::Act::kLinear);
  auto a = make_anatomy_network<double>(3, 16, 30, 1, 9);

  ModelManifest voxel_manifest = manifest;
  voxel_manifest.dvf_units = DvfUnits::kVoxel;
  ReconRequest req;
  req.state = 0.8;
  auto v_vox = reconstruct(mv, a, voxel_manifest, req);
  auto v_norm = reconstruct(mn, a, manifest, req);
  for (size_t i = 0; i < v_vox.voxels.size(); ++i)
    REQUIRE(v_vox.voxels[i] == Catch::Approx(v_norm.voxels[i]).margin(1e-6));
}

TEST_CASE("state kinds, clamping, and errors") {
  auto manifest = small_manifest();
  auto m = make_motion_network<double>(2, 8, 7, 1, 1);
  auto a = make_anatomy_network<double>(3, 12, 30, 1, 2);

  ReconRequest r01;
  r01.state = 0.75;
  ReconRequest r11;
  r11.state = 0.5;
  r11.state_kind = StateKind::kNorm11;
  REQUIRE(reconstruct(m, a, manifest, r01).voxels ==
          reconstruct(m, a, manifest, r11).voxels);

  // Out-of-range state clamps and flags under the default policy.
  ReconRequest hot;
  hot.state = 1.2;
  long flagged = 0;
  auto v_hot = reconstruct(m, a, manifest, hot, &flagged);
  REQUIRE(flagged == 1);
  ReconRequest top;
  top.state = 1.0;
  REQUIRE(v_hot.voxels == reconstruct(m, a, manifest, top).voxels);

  hot.policy = StatePolicy::kStrict;
  REQUIRE_THROWS_AS(reconstruct(m, a, manifest, hot), Error);

  ReconRequest bad;
  bad.batch_points = 0;
  REQUIRE_THROWS_AS(reconstruct(m, a, manifest, bad), Error);
}

TEST_CASE("series reconstruction repeats states and records timing") {
  auto manifest = small_manifest();
  auto m = make_motion_network<double>(2, 8, 7, 1, 3);
  auto a = make_anatomy_network<double>(3, 12, 30, 1, 4);
  auto series =
      reconstruct_series(m, a, manifest, {0.4, 0.4, 0.9}, 4096);
  REQUIRE(series.volumes.size() == 3);
  REQUIRE(series.wall_ms.size() == 3);
  REQUIRE(series.volumes[0].voxels == series.volumes[1].voxels);
  REQUIRE(series.volumes[0].voxels != series.volumes[2].voxels);
  for (double ms : series.wall_ms) REQUIRE(ms > 0);
}

TEST_CASE("mip projects the maximum along the anterior-posterior axis") {
  VolumeGrid v(4, 3, 2, 1, 1, 1);
  v.at(1, 0, 0) = 0.2f;
  v.at(1, 1, 0) = 0.9f;
  v.at(1, 2, 0) = 0.4f;
  v.at(3, 2, 1) = 0.7f;
  auto mip = mip_anterior_posterior(v);
  REQUIRE(mip.rows == 2);
  REQUIRE(mip.cols == 4);
  REQUIRE(mip.at(0, 1) == 0.9f);
  REQUIRE(mip.at(1, 3) == 0.7f);
  REQUIRE(mip.at(0, 0) == 0.0f);
}

TEST_CASE("baseline stacking is exact when states sit on bin centers") {
  SurrogateSignal sig;
  std::vector<int> positions{3, 9, 15};
  std::vector<double> states;
  for (int b = 0; b < 10; ++b) states.push_back((b + 0.5) / 10.0);
  auto ds = synthetic_sorted_dataset(positions, states, sig);

  SortingConfig cfg;
  for (int bin : {0, 4, 9}) {
    auto [vol, gaps] = reconstruct_baseline(ds, sig, cfg, bin);
    REQUIRE(gaps.entries.empty());
    const double s = (bin + 0.5) / 10.0;
    for (int p : positions) {
      const float expect = static_cast<float>(0.1 + 0.05 * p + 0.5 * s);
      REQUIRE(vol.at(5, p, 7) == expect);
    }
    // Un-acquired planes borrow the nearest acquired position.
    REQUIRE(vol.at(5, 0, 7) == vol.at(5, 3, 7));
    REQUIRE(vol.at(5, 19, 7) == vol.at(5, 15, 7));
    REQUIRE(vol.at(5, 6, 7) == vol.at(5, 3, 7));  // tie goes down
  }

  REQUIRE_THROWS_AS(reconstruct_baseline(ds, sig, cfg, 10), Error);
  REQUIRE_THROWS_AS(reconstruct_baseline(SliceDataset{}, sig, cfg, 0), Error);
}

TEST_CASE("baseline flags gaps when a bin has no slice at a position") {
  SurrogateSignal sig;
  // Only low-amplitude states exist; high bins must borrow.
  auto ds = synthetic_sorted_dataset({4, 8}, {0.05, 0.15, 0.25}, sig);
  SortingConfig cfg;
  auto [vol, gaps] = reconstruct_baseline(ds, sig, cfg, 9);
  REQUIRE(gaps.entries.size() == 2);
  for (const auto& e : gaps.entries) {
    REQUIRE(e.bin == 9);
    REQUIRE(e.state_distance > 0.5);
  }
  // The borrowed slice is the globally nearest state (0.25).
  const float expect4 = static_cast<float>(0.1 + 0.05 * 4 + 0.5 * 0.25);
  REQUIRE(vol.at(2, 4, 3) == expect4);
}

TEST_CASE("zero-motion baseline equals the static restack") {
  auto spec = default_phantom();
  auto motion = motion_for(spec);
  motion.dz_mm = 0;
  BreathSpec bs;
  bs.duration_s = 40;
  BreathModel breath{bs};
  AcquireConfig acfg;
  acfg.n_coronal_positions = 4;
  acfg.n_sweeps = 3;
  auto ds = acquire(spec, motion, breath, acfg);

  // Zero motion defeats the tracker, so supply a synthetic signal.
  SurrogateSignal sig;
  for (const auto& r : ds.records) {
    sig.timestamps.push_back(r.timestamp);
    sig.norm11.push_back(2 * r.amplitude_gt - 1);
    sig.norm01.push_back(r.amplitude_gt);
    sig.raw.push_back(20 + r.amplitude_gt);
  }
  sig.raw_min = 20;
  sig.raw_max = 21;

  auto [vol, gaps] = reconstruct_baseline(ds, sig, SortingConfig{}, 3);
  auto static_cor = render_coronal(spec, motion, 0.0, acfg.coronal_y0);
  for (int k = 0; k < spec.nz; ++k)
    for (int i = 0; i < spec.nx; ++i)
      REQUIRE(vol.at(i, acfg.coronal_y0, k) == static_cor.at(k, i));
}
