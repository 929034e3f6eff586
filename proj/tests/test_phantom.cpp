// Copyright 2026 The cpt4d Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "cpt4d/phantom.hpp"
#include "test_support.hpp"

using namespace cpt4d;

namespace {

// Sub-pixel row of the strongest positive vertical gradient in one column.
double edge_row(const SliceGrid& g, int col, int r0, int r1) {
  int best = -1;
  double best_g = -1;
  for (int r = r0 + 1; r < r1 - 1; ++r) {
    double gr = (g.at(r + 1, col) - g.at(r - 1, col)) / 2.0;
    if (gr > best_g) {
      best_g = gr;
      best = r;
    }
  }
  REQUIRE(best > r0);
  auto grad = [&](int r) {
    return (g.at(r + 1, col) - g.at(r - 1, col)) / 2.0;
  };
  double gm = grad(best - 1), g0 = grad(best), gp = grad(best + 1);
  double denom = gm - 2 * g0 + gp;
  double delta = denom != 0 ? 0.5 * (gm - gp) / denom : 0.0;
  return best + std::clamp(delta, -0.5, 0.5);
}

}  // namespace

TEST_CASE("anatomy values by construction") {
  auto s = default_phantom();
  REQUIRE(anatomy_at(s, {2, 2, 2}, true) == 0.02);
  REQUIRE(anatomy_at(s, {1, 180, 210}, false) == 0.02);

  // Lung ellipsoid center, away from vessels and the liver interface.
  Vec3d lc = s.lung_right.c;
  REQUIRE(anatomy_at(s, lc, true) == 0.15);

  // Vessel trunk midpoint sits on the centerline.
  const Capsule& trunk = s.vessels.front();
  Vec3d vm{(trunk.p0.x + trunk.p1.x) / 2, (trunk.p0.y + trunk.p1.y) / 2,
           (trunk.p0.z + trunk.p1.z) / 2};
  REQUIRE(anatomy_at(s, vm, true) == 0.85);

  // Deep body tissue between structures.
  REQUIRE(anatomy_at(s, {95, 40, 110}, true) == 0.5);
}

TEST_CASE("ground-truth displacement reference state and apex value") {
  auto s = default_phantom();
  auto m = motion_for(s);

  for (const Vec3d p : {Vec3d{10, 20, 30}, Vec3d{95, 95, 95}, s.liver.c}) {
    auto d = gt_displacement(m, p, 0.0);
    REQUIRE(d.x == 0.0);
    REQUIRE(d.y == 0.0);
    REQUIRE(d.z == 0.0);
  }

  // Dome apex: gain exactly 1, so z displacement equals dz_mm.
  Vec3d apex{s.liver.c.x, s.liver.c.y, s.liver.c.z - s.liver.a.z};
  auto d = gt_displacement(m, apex, 1.0);
  REQUIRE(d.z == m.dz_mm);
  REQUIRE(d.x == m.dz_mm * m.ap_coupling);

  // Outside the body the field vanishes identically.
  auto outside = gt_displacement(m, {2, 2, 2}, 0.7);
  REQUIRE(outside.z == 0.0);

  REQUIRE_THROWS_AS(gt_displacement(m, apex, 1.5), Error);
}

TEST_CASE("analytic motion jacobian matches finite differences") {
  auto s = default_phantom();
  auto m = motion_for(s);
  const double h = 1e-3;
  Rng rng(404);
  int tested = 0;
  while (tested < 60) {
    Vec3d p{rng.next_uniform(20, 170), rng.next_uniform(40, 150),
            rng.next_uniform(15, 205)};
    double a = rng.next_uniform(0.1, 1.0);
    double jan[9];
    gt_jacobian(m, p, a, jan);
    double jfd[9];
    for (int axis = 0; axis < 3; ++axis) {
      Vec3d pp = p, pm = p;
      (axis == 0 ? pp.x : axis == 1 ? pp.y : pp.z) += h;
      (axis == 0 ? pm.x : axis == 1 ? pm.y : pm.z) -= h;
      auto dp = gt_displacement(m, pp, a);
      auto dm = gt_displacement(m, pm, a);
      jfd[0 * 3 + axis] = (dp.x - dm.x) / (2 * h);
      jfd[1 * 3 + axis] = (dp.y - dm.y) / (2 * h);
      jfd[2 * 3 + axis] = (dp.z - dm.z) / (2 * h);
    }
    auto det = [](const double* j) {
      double f[9] = {1 + j[0], j[1], j[2], j[3], 1 + j[4],
                     j[5],     j[6], j[7], 1 + j[8]};
      return f[0] * (f[4] * f[8] - f[5] * f[7]) -
             f[1] * (f[3] * f[8] - f[5] * f[6]) +
             f[2] * (f[3] * f[7] - f[4] * f[6]);
    };
    REQUIRE(std::abs(det(jan) - det(jfd)) < 1e-8);
    ++tested;
  }
}

TEST_CASE("deformation stays smooth and fold-free at defaults") {
  auto s = default_phantom();
  auto m = motion_for(s);
  double min_det = 1e9, max_second = 0;
  const double h = 0.8;
  for (double a : {0.25, 0.5, 0.75, 1.0}) {
    for (double x = 8; x < 185; x += 11) {
      for (double y = 8; y < 185; y += 11) {
        for (double z = 5; z < 218; z += 9) {
          double j[9];
          gt_jacobian(m, {x, y, z}, a, j);
          double f[9] = {1 + j[0], j[1], j[2], j[3], 1 + j[4],
                         j[5],     j[6], j[7], 1 + j[8]};
          double det = f[0] * (f[4] * f[8] - f[5] * f[7]) -
                       f[1] * (f[3] * f[8] - f[5] * f[6]) +
                       f[2] * (f[3] * f[7] - f[4] * f[6]);
          min_det = std::min(min_det, det);
          // Central second difference of the z displacement along z.
          auto phi_z = [&](double zz) {
            return gt_displacement(m, {x, y, zz}, a).z;
          };
          double second =
              (phi_z(z + h) - 2 * phi_z(z) + phi_z(z - h)) / (h * h);
          max_second = std::max(max_second, std::abs(second));
        }
      }
    }
  }
  REQUIRE(min_det > 0.0);
  REQUIRE(max_second < 0.5);
}

TEST_CASE("breathing signal basics") {
  BreathSpec spec;
  spec.period_jitter = 0;
  spec.depth_jitter = 0;
  spec.drift = 0;
  spec.dt_s = 0.5;
  spec.duration_s = 40;
  auto sig = breathing_signal(spec);
  double mx = -1, mn = 2;
  for (double v : sig.values) {
    mx = std::max(mx, v);
    mn = std::min(mn, v);
  }
  REQUIRE(mx == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(mn == Catch::Approx(0.0).margin(1e-12));
  // Periodic: samples one period apart agree.
  for (size_t i = 0; i + 8 < sig.values.size(); ++i) {
    REQUIRE(sig.values[i] == Catch::Approx(sig.values[i + 8]).margin(1e-12));
  }

  BreathSpec irregular;  // defaults carry jitter and drift
  auto s1 = breathing_signal(irregular);
  auto s2 = breathing_signal(irregular);
  REQUIRE(s1.values == s2.values);
  for (double v : s1.values) {
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 1.0);
  }
  BreathSpec other = irregular;
  other.seed = 22;
  auto s3 = breathing_signal(other);
  REQUIRE(s1.values != s3.values);
}

TEST_CASE("render pull-back consistency and determinism") {
  PhantomSpec s = default_phantom();
  auto m = motion_for(s);
  const double a = 0.6;
  auto vol = render_volume(s, m, a);

  // Voxel centers evaluate the anatomy at the warped position exactly.
  Rng rng(9);
  for (int t = 0; t < 200; ++t) {
    int i = static_cast<int>(rng.next_index(s.nx));
    int j = static_cast<int>(rng.next_index(s.ny));
    int k = static_cast<int>(rng.next_index(s.nz));
    Vec3d p{i * s.sx, j * s.sy, k * s.sz};
    auto d = gt_displacement(m, p, a);
    float expect = static_cast<float>(
        anatomy_at(s, {p.x + d.x, p.y + d.y, p.z + d.z}, s.antialias));
    REQUIRE(vol.at(i, j, k) == expect);
  }

  // a = 0 renders the static anatomy.
  auto vol0 = render_volume(s, m, 0.0);
  for (int t = 0; t < 100; ++t) {
    int i = static_cast<int>(rng.next_index(s.nx));
    int j = static_cast<int>(rng.next_index(s.ny));
    int k = static_cast<int>(rng.next_index(s.nz));
    float expect = static_cast<float>(
        anatomy_at(s, {i * s.sx, j * s.sy, k * s.sz}, s.antialias));
    REQUIRE(vol0.at(i, j, k) == expect);
  }

  auto vol2 = render_volume(s, m, a);
  REQUIRE(vol.voxels == vol2.voxels);

  // Extracted planes match the volume bit for bit.
  int j = s.ny / 2 - 1;
  auto cor = render_coronal(s, m, a, j);
  for (int k = 0; k < s.nz; ++k)
    for (int i = 0; i < s.nx; ++i) REQUIRE(cor.at(k, i) == vol.at(i, j, k));
  int i = 2 * s.nx / 3;
  auto sag = render_sagittal(s, m, a, i);
  for (int k = 0; k < s.nz; ++k)
    for (int jj = 0; jj < s.ny; ++jj) REQUIRE(sag.at(k, jj) == vol.at(i, jj, k));
}

TEST_CASE("diaphragm edge moves superiorly with amplitude") {
  auto s = default_phantom();
  auto m = motion_for(s);
  const int col = 67;  // x over the dome in a mid coronal plane
  const int j = 47;

  auto r0 = edge_row(render_coronal(s, m, 0.0, j), col, 18, 36);
  auto r1 = edge_row(render_coronal(s, m, 1.0, j), col, 12, 36);
  const double shift = r0 - r1;  // rows toward the head
  const double nominal = m.dz_mm / s.sz;
  REQUIRE(shift > 0.75 * nominal);
  REQUIRE(shift < 1.1 * nominal);

  // Apex row is strictly monotone in amplitude.
  double prev = 1e9;
  for (double a : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
    double r = edge_row(render_coronal(s, m, a, j), col, 10, 38);
    REQUIRE(r < prev);
    prev = r;
  }
}
