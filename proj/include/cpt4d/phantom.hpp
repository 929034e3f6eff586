// Copyright 2026 The cpt4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Seedable analytic 4D thorax phantom: a static anatomy function, a smooth
// ground-truth breathing deformation with an analytic Jacobian, and an
// irregular respiratory amplitude generator. Together these provide the
// independent oracle the rest of the pipeline is verified against.
//
// Conventions: world coordinates in mm, voxel (i,j,k) centered at
// (i*sx, j*sy, k*sz); x is left-right, y anterior-posterior, z along the
// slice stack with z increasing toward the feet. Amplitude a = 0 is the
// reference state (end-exhale); volumes are rendered by the pull-back
// I(x, a) = anatomy(x + phi(x, a)).

#include <algorithm>
#include <cmath>
#include <vector>

#include "cpt4d/common.hpp"
#include "cpt4d/parallel.hpp"
#include "cpt4d/rng.hpp"
#include "cpt4d/volume.hpp"

namespace cpt4d {

struct Vec3d {
  double x = 0, y = 0, z = 0;
};

struct Ellipsoid {
  Vec3d c;  // center, mm
  Vec3d a;  // semi-axes, mm
};

struct Capsule {
  Vec3d p0, p1;
  double r = 1;
};

namespace detail {

// Quintic smoothstep: C2, zero-slope at both ends.
inline double smooth5(double x) {
  if (x <= 0) return 0;
  if (x >= 1) return 1;
  return x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
}

inline double smooth5_deriv(double x) {
  if (x <= 0 || x >= 1) return 0;
  const double u = x * (1.0 - x);
  return 30.0 * u * u;
}

inline double ellipsoid_e(const Ellipsoid& e, const Vec3d& p) {
  const double qx = (p.x - e.c.x) / e.a.x;
  const double qy = (p.y - e.c.y) / e.a.y;
  const double qz = (p.z - e.c.z) / e.a.z;
  return std::sqrt(qx * qx + qy * qy + qz * qz);
}

// First-order signed distance estimate, negative inside.
inline double ellipsoid_dist(const Ellipsoid& el, const Vec3d& p) {
  const double qx = (p.x - el.c.x) / el.a.x;
  const double qy = (p.y - el.c.y) / el.a.y;
  const double qz = (p.z - el.c.z) / el.a.z;
  const double e = std::sqrt(qx * qx + qy * qy + qz * qz);
  if (e < 1e-12) return -std::min({el.a.x, el.a.y, el.a.z});
  const double gn = std::sqrt(qx * qx / (el.a.x * el.a.x) +
                              qy * qy / (el.a.y * el.a.y) +
                              qz * qz / (el.a.z * el.a.z));
  return (e - 1.0) * e / gn;
}

inline double capsule_dist(const Capsule& c, const Vec3d& p) {
  const double dx = c.p1.x - c.p0.x, dy = c.p1.y - c.p0.y,
               dz = c.p1.z - c.p0.z;
  const double px = p.x - c.p0.x, py = p.y - c.p0.y, pz = p.z - c.p0.z;
  const double len2 = dx * dx + dy * dy + dz * dz;
  double t = len2 > 0 ? (px * dx + py * dy + pz * dz) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = px - t * dx, ey = py - t * dy, ez = pz - t * dz;
  return std::sqrt(ex * ex + ey * ey + ez * ez) - c.r;
}

}  // namespace detail

struct PhantomSpec {
  int nx = 96, ny = 96, nz = 64;
  double sx = 2.0, sy = 2.0, sz = 3.5;
  std::uint64_t seed = 7;
  bool antialias = true;

  double background = 0.02;
  double body_value = 0.50;
  double lung_value = 0.15;
  double liver_value = 0.55;
  double vessel_value = 0.85;
  double liver_edge_mm = 5.0;  // width of the lung-liver s-curve transition
  int vessels_per_lung = 7;

  // Derived geometry, filled by finalize().
  Ellipsoid body, lung_right, lung_left, liver;
  double liver_cut_z = 0;  // liver occupies z <= cut within its ellipsoid
  std::vector<Capsule> vessels;

  double extent_x() const { return (nx - 1) * sx; }
  double extent_y() const { return (ny - 1) * sy; }
  double extent_z() const { return (nz - 1) * sz; }
};

// Lays out the anatomy proportionally to the nominal 190 x 190 x 220.5 mm
// grid and grows the deterministic vessel trees.
inline void finalize_phantom(PhantomSpec& s) {
  require(s.nx >= 2 && s.ny >= 2 && s.nz >= 2, ErrorCode::kConfig,
          "phantom: dims must be at least 2 per axis");
  require(s.sx > 0 && s.sy > 0 && s.sz > 0, ErrorCode::kConfig,
          "phantom: spacing must be positive");
  const double kx = s.extent_x() / 190.0;
  const double ky = s.extent_y() / 190.0;
  const double kz = s.extent_z() / 220.5;
  const Vec3d mid{s.extent_x() / 2, s.extent_y() / 2, s.extent_z() / 2};

  s.body = {mid, {88 * kx, 70 * ky, 105 * kz}};
  s.lung_right = {{mid.x + 40 * kx, mid.y, mid.z - 35 * kz},
                  {32 * kx, 34 * ky, 52 * kz}};
  s.lung_left = {{mid.x - 40 * kx, mid.y, mid.z - 35 * kz},
                 {32 * kx, 34 * ky, 52 * kz}};
  s.liver = {{mid.x + 40 * kx, mid.y, mid.z + 29.75 * kz},
             {36 * kx, 40 * ky, 45 * kz}};
  s.liver_cut_z = s.liver.c.z;

  // Two-generation vessel tree per lung, nominal local coordinates (mm).
  struct Seg {
    Vec3d a, b;
    double r;
  };
  const Seg tree[] = {
      {{5, 0, -36}, {7, 0, 4}, 3.0},    {{7, 0, 4}, {-12, 5, 24}, 2.3},
      {{7, 0, 4}, {20, -5, 26}, 2.3},   {{-12, 5, 24}, {-18, 9, 34}, 1.7},
      {{-12, 5, 24}, {-6, -2, 36}, 1.7}, {{20, -5, 26}, {22, -7, 30}, 1.7},
      {{20, -5, 26}, {14, 2, 38}, 1.7},
  };
  s.vessels.clear();
  Rng rng(mix_seed(s.seed, 0x7e55e15ull));
  for (int lung = 0; lung < 2; ++lung) {
    const Ellipsoid& host = lung == 0 ? s.lung_right : s.lung_left;
    const double flip = lung == 0 ? 1.0 : -1.0;
    const int count = std::min<int>(s.vessels_per_lung,
                                    static_cast<int>(std::size(tree)));
    for (int v = 0; v < count; ++v) {
      Capsule c;
      auto place = [&](const Vec3d& local) {
        Vec3d p;
        p.x = host.c.x + flip * local.x * kx + rng.next_uniform(-1.5, 1.5) * kx;
        p.y = host.c.y + local.y * ky + rng.next_uniform(-1.5, 1.5) * ky;
        p.z = host.c.z + local.z * kz + rng.next_uniform(-1.5, 1.5) * kz;
        return p;
      };
      c.p0 = place(tree[v].a);
      c.p1 = place(tree[v].b);
      c.r = tree[v].r * std::min(kx, ky);
      s.vessels.push_back(c);
    }
  }

  // Primitives must stay inside the volume bounds.
  auto inside = [&](const Ellipsoid& e) {
    return e.c.x - e.a.x >= 0 && e.c.x + e.a.x <= s.extent_x() &&
           e.c.y - e.a.y >= 0 && e.c.y + e.a.y <= s.extent_y() &&
           e.c.z - e.a.z >= 0 && e.c.z + e.a.z <= s.extent_z();
  };
  require(inside(s.body) && inside(s.lung_right) && inside(s.lung_left) &&
              inside(s.liver),
          ErrorCode::kGeometry, "phantom: primitives exceed volume bounds");
}

inline PhantomSpec default_phantom() {
  PhantomSpec s;
  finalize_phantom(s);
  return s;
}

// Static anatomy intensity at a continuous position. Later primitives paint
// over earlier ones (vessels over lung over body); the lung-liver interface
// always blends over liver_edge_mm regardless of the antialias flag.
inline double anatomy_at(const PhantomSpec& s, const Vec3d& p, bool antialias) {
  const double band = std::min({s.sx, s.sy, s.sz});
  auto coverage = [&](double dist) {
    if (antialias) return std::clamp(0.5 - dist / band, 0.0, 1.0);
    return dist < 0 ? 1.0 : 0.0;
  };
  double v = s.background;
  auto paint = [&v](double value, double cov) {
    v = cov >= 1.0 ? value : v + (value - v) * cov;
  };
  paint(s.body_value, coverage(detail::ellipsoid_dist(s.body, p)));
  paint(s.lung_value, coverage(detail::ellipsoid_dist(s.lung_right, p)));
  paint(s.lung_value, coverage(detail::ellipsoid_dist(s.lung_left, p)));
  {
    // S-shaped transition of width liver_edge_mm with compact support, so
    // intensities away from the interface stay exact.
    const double d = std::max(detail::ellipsoid_dist(s.liver, p),
                              p.z - s.liver_cut_z);
    paint(s.liver_value, 1.0 - detail::smooth5((d / s.liver_edge_mm + 1) / 2));
  }
  for (const auto& c : s.vessels) {
    paint(s.vessel_value, coverage(detail::capsule_dist(c, p)));
  }
  return v;
}

// Smooth gain field with unit value at the diaphragm dome, exponential
// decay (length decay_mm) toward the lung apex, a taper to exactly zero at
// apex level, and compact support inside the body.
struct GroundTruthMotion {
  double dz_mm = 18.0;
  double decay_mm = 80.0;
  double ap_coupling = 0.15;

  Ellipsoid envelope;         // body ellipsoid
  double env_band = 0.4;      // in e-units of the envelope
  double diaphragm_z = 0;     // dome apex level, mm
  double apex_z = 0;          // superior lung apex level, mm
  double apex_band_mm = 36.0;
  double ramp_band_mm = 24.0;
};

inline GroundTruthMotion motion_for(const PhantomSpec& s) {
  GroundTruthMotion m;
  m.envelope = s.body;
  m.diaphragm_z = s.liver.c.z - s.liver.a.z;  // dome apex
  m.apex_z = s.lung_right.c.z - s.lung_right.a.z;
  return m;
}

namespace detail {

struct GainEval {
  double g = 0;
  Vec3d grad;  // d(g)/d(p)
};

inline GainEval motion_gain(const GroundTruthMotion& m, const Vec3d& p) {
  GainEval out;
  // Axial decay above the diaphragm, smoothly flattened near the dome.
  double axial = 1.0, axial_dz = 0.0;
  const double t = m.diaphragm_z - p.z;
  if (t > 0) {
    double ramp, ramp_d;
    if (t >= m.ramp_band_mm) {
      ramp = t;
      ramp_d = 1.0;
    } else {
      const double q = t / m.ramp_band_mm;
      ramp = t * smooth5(q);
      ramp_d = smooth5(q) + q * smooth5_deriv(q);
    }
    axial = std::exp(-ramp / m.decay_mm);
    axial_dz = axial * ramp_d / m.decay_mm;
  }
  // Hard zero at and above the lung apex.
  const double qa = (p.z - m.apex_z) / m.apex_band_mm;
  const double taper = smooth5(qa);
  const double taper_dz = smooth5_deriv(qa) / m.apex_band_mm;
  // Compact support inside the body.
  const Ellipsoid& el = m.envelope;
  const double qx = (p.x - el.c.x) / el.a.x;
  const double qy = (p.y - el.c.y) / el.a.y;
  const double qz = (p.z - el.c.z) / el.a.z;
  const double e = std::sqrt(qx * qx + qy * qy + qz * qz);
  double env = 1.0;
  Vec3d env_grad;
  if (e >= 1e-12) {
    const double te = (1.0 - e) / m.env_band;
    env = smooth5(te);
    const double sd = smooth5_deriv(te);
    if (sd != 0) {
      const double coef = -sd / (m.env_band * e);
      env_grad = {coef * qx / el.a.x, coef * qy / el.a.y, coef * qz / el.a.z};
    }
  }
  out.g = axial * taper * env;
  out.grad.x = axial * taper * env_grad.x;
  out.grad.y = axial * taper * env_grad.y;
  out.grad.z = axial_dz * taper * env + axial * taper_dz * env +
               axial * taper * env_grad.z;
  return out;
}

}  // namespace detail

// phi(p, a) = a * dz * g(p) * (ap_coupling, 0, 1).
inline Vec3d gt_displacement(const GroundTruthMotion& m, const Vec3d& p,
                             double a) {
  require(a >= 0.0 && a <= 1.0, ErrorCode::kDomain,
          "gt_displacement: amplitude outside [0, 1]");
  const double g = detail::motion_gain(m, p).g;
  const double mz = a * m.dz_mm * g;
  return {m.ap_coupling * mz, 0.0, mz};
}

// Analytic d(phi)/d(p), row-major 3x3.
inline void gt_jacobian(const GroundTruthMotion& m, const Vec3d& p, double a,
                        double j[9]) {
  const auto gain = detail::motion_gain(m, p);
  const double cx = a * m.dz_mm * m.ap_coupling;
  const double cz = a * m.dz_mm;
  j[0] = cx * gain.grad.x;
  j[1] = cx * gain.grad.y;
  j[2] = cx * gain.grad.z;
  j[3] = j[4] = j[5] = 0.0;
  j[6] = cz * gain.grad.x;
  j[7] = cz * gain.grad.y;
  j[8] = cz * gain.grad.z;
}

struct BreathSpec {
  double period_s = 4.0;
  double period_jitter = 0.12;  // fraction of the base period
  double depth_jitter = 0.22;   // fraction of full depth
  double drift = 0.05;          // baseline drift amplitude
  double duration_s = 240.0;
  double dt_s = 0.32;           // slice acquisition time
  std::uint64_t seed = 21;
};

// Concatenated raised-cosine half-cycles with per-cycle period and depth
// jitter plus a slow sinusoidal baseline drift, clipped to [0, 1].
class BreathModel {
 public:
  explicit BreathModel(const BreathSpec& spec) : spec_(spec) {
    require(spec.period_s > 0 && spec.dt_s > 0, ErrorCode::kConfig,
            "breath: period and dt must be positive");
    require(spec.period_jitter >= 0 && spec.period_jitter < 1 &&
                spec.depth_jitter >= 0 && spec.depth_jitter < 1,
            ErrorCode::kConfig, "breath: jitters must lie in [0, 1)");
    Rng rng(mix_seed(spec.seed, 0xb4ea7full));
    drift_phase_ = rng.next_uniform(0, 6.283185307179586);
    double t = 0;
    const double horizon = spec.duration_s + 8 * spec.period_s;
    while (t < horizon) {
      Cycle c;
      c.start = t;
      c.period =
          spec.period_s * (1.0 + spec.period_jitter * rng.next_uniform(-1, 1));
      c.depth = 1.0 - spec.depth_jitter * rng.next_unit();
      cycles_.push_back(c);
      t += c.period;
    }
  }

  double amplitude(double t) const {
    require(t >= 0 && t <= cycles_.back().start + cycles_.back().period,
            ErrorCode::kDomain, "breath: time outside generated horizon");
    size_t lo = 0, hi = cycles_.size() - 1;
    while (lo < hi) {
      size_t mid = (lo + hi + 1) / 2;
      if (cycles_[mid].start <= t) {
        lo = mid;
      } else {
        hi = mid - 1;
      }
    }
    const Cycle& c = cycles_[lo];
    const double local = (t - c.start) / c.period;
    double a = c.depth * (1.0 - std::cos(6.283185307179586 * local)) / 2.0;
    if (spec_.drift != 0) {
      a += spec_.drift *
           std::sin(6.283185307179586 * t / kDriftPeriod + drift_phase_);
    }
    return std::clamp(a, 0.0, 1.0);
  }

  const BreathSpec& spec() const { return spec_; }

 private:
  struct Cycle {
    double start, period, depth;
  };
  static constexpr double kDriftPeriod = 47.0;  // s, incommensurate with 4 s
  BreathSpec spec_;
  std::vector<Cycle> cycles_;
  double drift_phase_ = 0;
};

struct AmplitudeSeries {
  std::vector<double> timestamps;
  std::vector<double> values;
};

inline AmplitudeSeries breathing_signal(const BreathSpec& spec) {
  require(spec.duration_s >= 2 * spec.period_s, ErrorCode::kConfig,
          "breath: duration should cover several cycles");
  BreathModel model(spec);
  AmplitudeSeries out;
  for (double t = 0; t <= spec.duration_s; t += spec.dt_s) {
    out.timestamps.push_back(t);
    out.values.push_back(model.amplitude(t));
  }
  return out;
}

// Shared pixel evaluator: the pull-back sample at voxel (i, j, k). Slices
// and volumes route through this so extracted planes match bit for bit.
inline float sample_warped(const PhantomSpec& s, const GroundTruthMotion& m,
                           double a, int i, int j, int k) {
  const Vec3d p{i * s.sx, j * s.sy, k * s.sz};
  const Vec3d d = gt_displacement(m, p, a);
  return static_cast<float>(
      anatomy_at(s, {p.x + d.x, p.y + d.y, p.z + d.z}, s.antialias));
}

inline VolumeGrid render_volume(const PhantomSpec& s,
                                const GroundTruthMotion& m, double a) {
  VolumeGrid v(s.nx, s.ny, s.nz, s.sx, s.sy, s.sz);
  v.amplitude = a;
  v.seed = s.seed;
  parallel_ranges(s.nz, 1, [&](int k0, int k1) {
    for (int k = k0; k < k1; ++k)
      for (int j = 0; j < s.ny; ++j)
        for (int i = 0; i < s.nx; ++i) v.at(i, j, k) = sample_warped(s, m, a, i, j, k);
  });
  return v;
}

// Coronal plane j: rows follow z, columns follow x.
inline SliceGrid render_coronal(const PhantomSpec& s,
                                const GroundTruthMotion& m, double a, int j) {
  require(j >= 0 && j < s.ny, ErrorCode::kGeometry,
          "render_coronal: plane outside volume");
  SliceGrid g(s.nz, s.nx, s.sz, s.sx);
  g.amplitude = a;
  g.seed = s.seed;
  for (int k = 0; k < s.nz; ++k)
    for (int i = 0; i < s.nx; ++i) g.at(k, i) = sample_warped(s, m, a, i, j, k);
  return g;
}

// Sagittal plane i: rows follow z, columns follow y.
inline SliceGrid render_sagittal(const PhantomSpec& s,
                                 const GroundTruthMotion& m, double a, int i) {
  require(i >= 0 && i < s.nx, ErrorCode::kGeometry,
          "render_sagittal: plane outside volume");
  SliceGrid g(s.nz, s.ny, s.sz, s.sy);
  g.amplitude = a;
  g.seed = s.seed;
  for (int k = 0; k < s.nz; ++k)
    for (int j = 0; j < s.ny; ++j) g.at(k, j) = sample_warped(s, m, a, i, j, k);
  return g;
}

}  // namespace cpt4d
