// Copyright 2026 The cpt4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Full-volume reconstruction at an arbitrary respiratory state: iterate the
// voxel grid in chunks, predict the displacement field, rescale it to
// normalized units when the manifest declares voxel-unit output (factor
// 2/size per axis, no center shift), warp, query the anatomy network, and
// assemble in input order. Also the conventional amplitude-sorting baseline
// (binning and slice stacking only; no registration) and its gap report.

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cpt4d/metrics.hpp"

namespace cpt4d {

enum class StateKind { kNorm01, kNorm11 };

struct ReconRequest {
  double state = 0;
  StateKind state_kind = StateKind::kNorm01;
  int batch_points = 65536;
  StatePolicy policy = StatePolicy::kClampWarn;
};

template <class T>
VolumeGrid reconstruct(const MotionNetwork<T>& motion,
                       const AnatomyNetwork<T>& anatomy,
                       const ModelManifest& manifest, const ReconRequest& req,
                       long* flagged_states = nullptr) {
  require(req.batch_points >= 1, ErrorCode::kConfig,
          "reconstruct: batch_points must be positive");
  const auto& g = manifest.geom;
  require(g.nx >= 2 && g.ny >= 2 && g.nz >= 2, ErrorCode::kGeometry,
          "reconstruct: bad grid in manifest");
  const double s11 =
      req.state_kind == StateKind::kNorm01 ? 2.0 * req.state - 1.0 : req.state;
  const T s = apply_state_policy(T(s11), req.policy, flagged_states);

  VolumeGrid vol(g.nx, g.ny, g.nz, g.sx, g.sy, g.sz);
  vol.amplitude = (double(s) + 1.0) / 2.0;
  const long total = static_cast<long>(vol.size());
  const int chunk = req.batch_points;
  const int n_chunks = static_cast<int>((total + chunk - 1) / chunk);

  parallel_ranges(n_chunks, 1, [&](int c0, int c1) {
    for (int ci = c0; ci < c1; ++ci) {
      const long lo = static_cast<long>(ci) * chunk;
      const long hi = std::min(total, lo + chunk);
      const int n = static_cast<int>(hi - lo);
      Mat<T> coords(n, 3);
      for (int r = 0; r < n; ++r) {
        const long idx = lo + r;
        const int i = static_cast<int>(idx % g.nx);
        const int j = static_cast<int>((idx / g.nx) % g.ny);
        const int k = static_cast<int>(idx / (static_cast<long>(g.nx) * g.ny));
        coords.at(r, 0) = T(normalized_coord(i, g.nx));
        coords.at(r, 1) = T(normalized_coord(j, g.ny));
        coords.at(r, 2) = T(normalized_coord(k, g.nz));
      }
      Mat<T> phi = nn::forward(motion.core, augment_state(coords, s));
      if (manifest.dvf_units == DvfUnits::kVoxel) {
        const T fx = T(2.0 / g.nx), fy = T(2.0 / g.ny), fz = T(2.0 / g.nz);
        for (int r = 0; r < n; ++r) {
          phi.at(r, 0) *= fx;
          phi.at(r, 1) *= fy;
          phi.at(r, 2) *= fz;
        }
      }
      auto vals = intensity(anatomy, warp(coords, phi));
      for (int r = 0; r < n; ++r)
        vol.voxels[lo + r] = static_cast<float>(vals[r]);
    }
  });
  return vol;
}

template <class T>
struct ReconSeries {
  std::vector<VolumeGrid> volumes;
  std::vector<double> wall_ms;
};

template <class T>
ReconSeries<T> reconstruct_series(const MotionNetwork<T>& motion,
                                  const AnatomyNetwork<T>& anatomy,
                                  const ModelManifest& manifest,
                                  const std::vector<double>& states01,
                                  int batch_points = 65536) {
  ReconSeries<T> out;
  for (double s : states01) {
    ReconRequest req;
    req.state = s;
    req.batch_points = batch_points;
    const auto t0 = std::chrono::steady_clock::now();
    out.volumes.push_back(reconstruct(motion, anatomy, manifest, req));
    const auto t1 = std::chrono::steady_clock::now();
    out.wall_ms.push_back(
        std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return out;
}

// Maximum intensity projection along the anterior-posterior axis.
inline SliceGrid mip_anterior_posterior(const VolumeGrid& v) {
  SliceGrid g(v.nz, v.nx, v.sz, v.sx);
  g.amplitude = v.amplitude;
  for (int k = 0; k < v.nz; ++k) {
    for (int i = 0; i < v.nx; ++i) {
      float m = 0;
      for (int j = 0; j < v.ny; ++j) m = std::max(m, v.at(i, j, k));
      g.at(k, i) = m;
    }
  }
  return g;
}

struct SortingConfig {
  int n_bins = 10;
};

struct GapEntry {
  int bin = 0;
  int position = 0;       // coronal y index
  int borrowed_record = 0;
  double state_distance = 0;  // |state01 - bin center|
};

struct GapReport {
  std::vector<GapEntry> entries;
  int bins_built = 0;
};

namespace detail {

struct BinSelection {
  std::map<int, const SliceRecord*> by_position;  // position -> chosen slice
  std::vector<GapEntry> gaps;
};

// Nearest-to-center selection within the bin; positions with no in-bin
// slice borrow the globally nearest-state slice for that position.
inline BinSelection select_bin_slices(
    const std::vector<std::pair<const SliceRecord*, double>>& coronal_states,
    int bin, int n_bins) {
  const double center = (bin + 0.5) / n_bins;
  const double lo = static_cast<double>(bin) / n_bins;
  const double hi = static_cast<double>(bin + 1) / n_bins;
  BinSelection sel;
  std::map<int, std::pair<const SliceRecord*, double>> best_in_bin, best_any;
  for (const auto& [rec, s01] : coronal_states) {
    const double dist = std::abs(s01 - center);
    auto& any = best_any[rec->plane_position];
    if (!any.first || dist < any.second) any = {rec, dist};
    const bool in_bin = s01 >= lo && (s01 < hi || (bin == n_bins - 1 && s01 <= hi));
    if (in_bin) {
      auto& inb = best_in_bin[rec->plane_position];
      if (!inb.first || dist < inb.second) inb = {rec, dist};
    }
  }
  for (const auto& [pos, any] : best_any) {
    auto it = best_in_bin.find(pos);
    if (it != best_in_bin.end()) {
      sel.by_position[pos] = it->second.first;
    } else {
      sel.by_position[pos] = any.first;
      sel.gaps.push_back({bin, pos, any.first->index, any.second});
    }
  }
  return sel;
}

}  // namespace detail

// States in [0, 1] for every record whose timestamp the signal covers.
inline std::vector<std::pair<const SliceRecord*, double>> coronal_states01(
    const SliceDataset& ds, const SurrogateSignal& signal) {
  std::vector<std::pair<const SliceRecord*, double>> out;
  for (const auto& r : ds.records) {
    if (r.kind != SliceKind::kCoronal) continue;
    if (r.timestamp < signal.timestamps.front() ||
        r.timestamp > signal.timestamps.back())
      continue;  // states before the first navigator sample are undefined
    const double s01 = (state_for_record(signal, r) + 1.0) / 2.0;
    out.push_back({&r, s01});
  }
  return out;
}

// Amplitude-sorted slice stacking. The amplitude range [0, 1] of the
// training normalization splits into n_bins equal bins; each coronal
// position contributes its nearest-to-center slice. Planes that were never
// acquired copy the nearest acquired position's slice so sagittal planes
// remain extractable.
inline std::pair<VolumeGrid, GapReport> reconstruct_baseline(
    const SliceDataset& dataset, const SurrogateSignal& signal,
    const SortingConfig& cfg, int bin_index) {
  require(!dataset.records.empty(), ErrorCode::kConfig,
          "baseline: empty dataset");
  require(cfg.n_bins >= 2, ErrorCode::kConfig, "baseline: need >= 2 bins");
  require(bin_index >= 0 && bin_index < cfg.n_bins, ErrorCode::kConfig,
          "baseline: bin index out of range");
  auto states = coronal_states01(dataset, signal);
  require(!states.empty(), ErrorCode::kConfig,
          "baseline: no coronal slices with defined states");

  auto sel = detail::select_bin_slices(states, bin_index, cfg.n_bins);
  const auto& g = dataset.geom;
  VolumeGrid vol(g.nx, g.ny, g.nz, g.sx, g.sy, g.sz);
  vol.amplitude = (bin_index + 0.5) / cfg.n_bins;

  // Acquired planes stack directly; planes never acquired copy the nearest
  // acquired position so sagittal planes stay extractable.
  auto nearest_position = [&](int j) -> const SliceRecord* {
    auto it = sel.by_position.lower_bound(j);
    if (it != sel.by_position.end() && it->first == j) return it->second;
    if (it == sel.by_position.begin()) return it->second;
    if (it == sel.by_position.end()) return std::prev(it)->second;
    auto before = std::prev(it);
    return (j - before->first) <= (it->first - j) ? before->second
                                                  : it->second;
  };
  for (int j = 0; j < g.ny; ++j) {
    const SliceRecord* pick = nearest_position(j);
    for (int k = 0; k < g.nz; ++k)
      for (int i = 0; i < g.nx; ++i) vol.at(i, j, k) = pick->pixels.at(k, i);
  }

  GapReport rep;
  rep.entries = sel.gaps;
  rep.bins_built = 1;
  return {std::move(vol), std::move(rep)};
}

inline void save_gap_report(const std::string& path, const GapReport& rep) {
  std::ofstream f(path);
  require(f.good(), ErrorCode::kIo, "cannot write gap report: " + path);
  f << "bin,position,borrowed_record,state_distance\n";
  for (const auto& e : rep.entries) {
    f << e.bin << "," << e.position << "," << e.borrowed_record << ","
      << format_g17(e.state_distance) << "\n";
  }
  f << "# bins_built " << rep.bins_built << ", borrowed " << rep.entries.size()
    << "\n";
}

// Baseline counterpart of evaluate_split: each validation record is scored
// against the plane extracted from its bin's stacked volume.
inline EvalReport evaluate_baseline(const SliceDataset& train,
                                    const SliceDataset& val,
                                    const SurrogateSignal& signal,
                                    const SortingConfig& cfg,
                                    const TrackerConfig& tracker,
                                    GapReport* gaps_out = nullptr) {
  require(!val.records.empty(), ErrorCode::kConfig,
          "evaluate_baseline: empty validation split");
  std::vector<std::optional<VolumeGrid>> bins(cfg.n_bins);
  GapReport all_gaps;
  auto volume_for = [&](int bin) -> const VolumeGrid& {
    if (!bins[bin]) {
      auto [vol, gaps] = reconstruct_baseline(train, signal, cfg, bin);
      bins[bin] = std::move(vol);
      for (auto& e : gaps.entries) all_gaps.entries.push_back(e);
      all_gaps.bins_built += 1;
    }
    return *bins[bin];
  };

  EvalReport rep;
  std::vector<SliceGrid> pred_navs, gt_navs;
  for (const auto& rec : val.records) {
    const double s01 =
        std::clamp((state_for_record(signal, rec) + 1.0) / 2.0, 0.0, 1.0);
    int bin = std::min(cfg.n_bins - 1,
                       static_cast<int>(std::floor(s01 * cfg.n_bins)));
    const VolumeGrid& vol = volume_for(bin);
    const int rows = rec.pixels.rows, cols = rec.pixels.cols;
    std::vector<double> pred(static_cast<size_t>(rows) * cols);
    SliceGrid pg(rows, cols, rec.pixels.srow, rec.pixels.scol);
    if (rec.kind == SliceKind::kCoronal) {
      for (int k = 0; k < rows; ++k)
        for (int i = 0; i < cols; ++i) {
          pg.at(k, i) = vol.at(i, rec.plane_position, k);
          pred[static_cast<size_t>(k) * cols + i] = pg.at(k, i);
        }
    } else {
      for (int k = 0; k < rows; ++k)
        for (int j = 0; j < cols; ++j) {
          pg.at(k, j) = vol.at(rec.plane_position, j, k);
          pred[static_cast<size_t>(k) * cols + j] = pg.at(k, j);
        }
    }
    std::vector<double> gtd = slice_to_doubles(rec.pixels);
    SliceScore sc;
    sc.record_index = rec.index;
    sc.kind = rec.kind;
    sc.plane = rec.plane_position;
    sc.timestamp = rec.timestamp;
    sc.state01 = s01;
    sc.im = image_metrics(pred, gtd, rows, cols);
    rep.slices.push_back(sc);
    if (rec.kind == SliceKind::kNavigator) {
      pred_navs.push_back(std::move(pg));
      gt_navs.push_back(rec.pixels);
    }
  }
  detail::fill_trajectory(rep, pred_navs, gt_navs, tracker);
  detail::aggregate_scores(rep);
  if (gaps_out) *gaps_out = std::move(all_gaps);
  return rep;
}

}  // namespace cpt4d
