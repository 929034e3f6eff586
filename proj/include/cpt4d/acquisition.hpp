// Copyright 2026 The cpt4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Interleaved cine protocol simulation: alternating moving coronal stack
// slices and a fixed sagittal navigator, one acquisition per dt, each slice
// rendered at the instantaneous breathing amplitude. Also the temporal
// train/validation split and coordinate-point sampling used for training.
//
// Normalized coordinates map voxel center 0 to -1 and center (n-1) to +1
// on every axis; this convention is fixed for checkpoint portability.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cpt4d/common.hpp"
#include "cpt4d/mat.hpp"
#include "cpt4d/phantom.hpp"
#include "cpt4d/rng.hpp"
#include "cpt4d/volume.hpp"

namespace cpt4d {

inline double normalized_coord(int index, int n) {
  return 2.0 * index / (n - 1) - 1.0;
}

inline int index_from_normalized(double x, int n) {
  return static_cast<int>(std::lround((x + 1.0) * (n - 1) / 2.0));
}

enum class SliceKind { kCoronal, kNavigator };

inline const char* slice_kind_name(SliceKind k) {
  return k == SliceKind::kCoronal ? "coronal" : "navigator";
}

struct SliceRecord {
  int index = 0;
  SliceKind kind = SliceKind::kCoronal;
  int plane_position = 0;  // coronal: y index; navigator: x index
  double timestamp = 0;
  double amplitude_gt = 0;  // oracle bookkeeping; never consumed by training
  SliceGrid pixels;         // rows follow z; cols follow x (cor) or y (nav)
};

struct DatasetGeometry {
  int nx = 0, ny = 0, nz = 0;
  double sx = 1, sy = 1, sz = 1;
};

struct SliceDataset {
  DatasetGeometry geom;
  std::vector<SliceRecord> records;
  int split_boundary = -1;  // set by split()
};

struct AcquireConfig {
  int n_coronal_positions = 20;
  int n_sweeps = 18;
  int coronal_y0 = 28;
  int coronal_stride = 2;
  int navigator_x = 67;
};

// Record sequence cor(p1), nav, cor(p2), nav, ... with coronal positions
// sweeping cyclically; timestamps advance by breath.dt per acquisition.
inline SliceDataset acquire(const PhantomSpec& spec,
                            const GroundTruthMotion& motion,
                            const BreathModel& breath,
                            const AcquireConfig& cfg) {
  require(cfg.n_coronal_positions >= 1 &&
              cfg.n_coronal_positions <= spec.ny,
          ErrorCode::kConfig, "acquire: coronal position count exceeds ny");
  require(cfg.n_sweeps >= 1, ErrorCode::kConfig, "acquire: need >= 1 sweep");
  const int last_y =
      cfg.coronal_y0 + (cfg.n_coronal_positions - 1) * cfg.coronal_stride;
  require(cfg.coronal_y0 >= 0 && cfg.coronal_stride >= 1 && last_y < spec.ny,
          ErrorCode::kGeometry, "acquire: coronal sweep leaves the volume");
  require(cfg.navigator_x >= 0 && cfg.navigator_x < spec.nx,
          ErrorCode::kGeometry, "acquire: navigator plane outside the volume");

  const double dt = breath.spec().dt_s;
  const int n_records = 2 * cfg.n_coronal_positions * cfg.n_sweeps;
  require(n_records * dt <= breath.spec().duration_s, ErrorCode::kConfig,
          strprintf("acquire: %d records need %.1f s of breathing signal",
                    n_records, n_records * dt));

  SliceDataset ds;
  ds.geom = {spec.nx, spec.ny, spec.nz, spec.sx, spec.sy, spec.sz};
  ds.records.resize(n_records);
  parallel_ranges(n_records, 4, [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
      SliceRecord& r = ds.records[i];
      r.index = i;
      r.timestamp = i * dt;
      r.amplitude_gt = breath.amplitude(r.timestamp);
      if (i % 2 == 0) {
        const int sweep_pos = (i / 2) % cfg.n_coronal_positions;
        r.kind = SliceKind::kCoronal;
        r.plane_position = cfg.coronal_y0 + sweep_pos * cfg.coronal_stride;
        r.pixels = render_coronal(spec, motion, r.amplitude_gt,
                                  r.plane_position);
      } else {
        r.kind = SliceKind::kNavigator;
        r.plane_position = cfg.navigator_x;
        r.pixels = render_sagittal(spec, motion, r.amplitude_gt,
                                   cfg.navigator_x);
      }
    }
  });
  return ds;
}

// Temporal prefix/suffix split at floor(n * num / den).
inline std::pair<SliceDataset, SliceDataset> split(const SliceDataset& ds,
                                                   long num = 11,
                                                   long den = 12) {
  require(!ds.records.empty(), ErrorCode::kConfig, "split: empty dataset");
  require(num > 0 && den > 0 && num < den, ErrorCode::kConfig,
          "split: fraction must lie in (0, 1)");
  const long n = static_cast<long>(ds.records.size());
  const long boundary = n * num / den;
  SliceDataset train, val;
  train.geom = val.geom = ds.geom;
  train.records.assign(ds.records.begin(), ds.records.begin() + boundary);
  val.records.assign(ds.records.begin() + boundary, ds.records.end());
  train.split_boundary = static_cast<int>(boundary);
  return {train, val};
}

// Fraction of the training amplitude range that the validation amplitudes
// span; generation-time guard against extrapolation-only validation.
inline double validation_amplitude_coverage(const SliceDataset& train,
                                            const SliceDataset& val) {
  require(!train.records.empty() && !val.records.empty(), ErrorCode::kConfig,
          "amplitude coverage: empty split");
  auto range = [](const SliceDataset& d) {
    double lo = 2, hi = -1;
    for (const auto& r : d.records) {
      lo = std::min(lo, r.amplitude_gt);
      hi = std::max(hi, r.amplitude_gt);
    }
    return std::pair<double, double>(lo, hi);
  };
  auto [tlo, thi] = range(train);
  auto [vlo, vhi] = range(val);
  if (thi <= tlo) return 0;
  const double lo = std::max(tlo, vlo), hi = std::min(thi, vhi);
  return std::max(0.0, hi - lo) / (thi - tlo);
}

// Draws n pixel centers uniformly with replacement (or every pixel exactly
// once in dense mode) and maps them to normalized 3D coordinates; the
// slice's fixed axis contributes one constant coordinate.
template <class T = double>
std::pair<Mat<T>, std::vector<T>> sample_points(const SliceRecord& rec,
                                                const DatasetGeometry& g,
                                                int n, std::uint64_t seed,
                                                bool dense = false) {
  const int rows = rec.pixels.rows, cols = rec.pixels.cols;
  require(rows > 0 && cols > 0, ErrorCode::kConfig,
          "sample_points: empty slice");
  const long npix = static_cast<long>(rows) * cols;
  if (dense) n = static_cast<int>(npix);
  require(n > 0, ErrorCode::kConfig, "sample_points: need n > 0");

  Mat<T> coords(n, 3);
  std::vector<T> values(n);
  Rng rng(mix_seed(seed, 0x5a3b1eull, rec.index));
  for (int i = 0; i < n; ++i) {
    long pix = dense ? i : static_cast<long>(rng.next_index(npix));
    const int r = static_cast<int>(pix / cols);
    const int c = static_cast<int>(pix % cols);
    int vi, vj;
    if (rec.kind == SliceKind::kCoronal) {
      vi = c;
      vj = rec.plane_position;
    } else {
      vi = rec.plane_position;
      vj = c;
    }
    coords.at(i, 0) = T(normalized_coord(vi, g.nx));
    coords.at(i, 1) = T(normalized_coord(vj, g.ny));
    coords.at(i, 2) = T(normalized_coord(r, g.nz));
    values[i] = T(rec.pixels.at(r, c));
  }
  return {std::move(coords), std::move(values)};
}

inline constexpr const char* kDatasetMagic = "CPT4D-DATASET";

// Directory layout: <dir>/manifest.txt plus <dir>/slices/slice_NNNNNN.slc.
inline void save_dataset(const std::string& dir, const SliceDataset& ds) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "slices");
  std::ofstream f(fs::path(dir) / "manifest.txt");
  require(f.good(), ErrorCode::kIo, "cannot write dataset manifest in " + dir);
  f << kDatasetMagic << "\n";
  f << "dims " << ds.geom.nx << " " << ds.geom.ny << " " << ds.geom.nz << "\n";
  f << "spacing " << format_g17(ds.geom.sx) << " " << format_g17(ds.geom.sy)
    << " " << format_g17(ds.geom.sz) << "\n";
  f << "records " << ds.records.size() << "\n";
  for (const auto& r : ds.records) {
    std::string rel = strprintf("slices/slice_%06d.slc", r.index);
    f << r.index << " " << slice_kind_name(r.kind) << " " << r.plane_position
      << " " << format_g17(r.timestamp) << " " << format_g17(r.amplitude_gt)
      << " " << rel << "\n";
    SliceGrid g = r.pixels;
    g.amplitude = r.amplitude_gt;
    save_slice((fs::path(dir) / rel).string(), g);
  }
  require(f.good(), ErrorCode::kIo, "dataset manifest write failed in " + dir);
}

inline SliceDataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream f(fs::path(dir) / "manifest.txt");
  require(f.good(), ErrorCode::kMissingFile,
          "cannot open dataset manifest in " + dir);
  std::string line;
  require(static_cast<bool>(std::getline(f, line)) && line == kDatasetMagic,
          ErrorCode::kIo, "bad dataset magic in " + dir);
  SliceDataset ds;
  std::string key;
  {
    std::getline(f, line);
    std::istringstream ss(line);
    ss >> key >> ds.geom.nx >> ds.geom.ny >> ds.geom.nz;
    require(key == "dims", ErrorCode::kIo, "bad dims line in " + dir);
  }
  {
    std::getline(f, line);
    std::istringstream ss(line);
    ss >> key >> ds.geom.sx >> ds.geom.sy >> ds.geom.sz;
    require(key == "spacing", ErrorCode::kIo, "bad spacing line in " + dir);
  }
  long n = 0;
  {
    std::getline(f, line);
    std::istringstream ss(line);
    ss >> key >> n;
    require(key == "records" && n > 0, ErrorCode::kIo,
            "bad records line in " + dir);
  }
  ds.records.reserve(n);
  for (long i = 0; i < n; ++i) {
    require(static_cast<bool>(std::getline(f, line)), ErrorCode::kIo,
            "truncated dataset manifest in " + dir);
    std::istringstream ss(line);
    SliceRecord r;
    std::string kind, rel;
    ss >> r.index >> kind >> r.plane_position >> r.timestamp >>
        r.amplitude_gt >> rel;
    require(static_cast<bool>(ss), ErrorCode::kIo,
            "bad record line in dataset manifest: " + line);
    if (kind == "coronal") {
      r.kind = SliceKind::kCoronal;
    } else if (kind == "navigator") {
      r.kind = SliceKind::kNavigator;
    } else {
      fail(ErrorCode::kIo, "unknown slice kind: " + kind);
    }
    r.pixels = load_slice((fs::path(dir) / rel).string());
    ds.records.push_back(std::move(r));
  }
  return ds;
}

}  // namespace cpt4d
