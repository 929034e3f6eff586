// Copyright 2026 The cpt4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Respiratory surrogate extraction from navigator slices. Five landmark
// columns are tracked by locating the strongest positive vertical intensity
// gradient inside a row window, refined to sub-pixel precision with a
// parabolic fit; the raw signal is the mean tracked row. Both the [0,1] and
// [-1,1] normalizations are kept, with the min/max frozen over a
// caller-chosen prefix (the training split) so later samples may exceed the
// nominal range.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "cpt4d/acquisition.hpp"
#include "cpt4d/common.hpp"

namespace cpt4d {

struct TrackerConfig {
  int roi_row_min = 18;          // inclusive, z rows
  int roi_row_max = 34;          // inclusive
  std::vector<int> columns;      // landmark columns; empty selects defaults
  double min_gradient = 0.02;    // intensity per row
};

struct SurrogateSignal {
  std::vector<double> timestamps;
  std::vector<double> raw;  // mean landmark row, pixels
  std::vector<double> norm01;
  std::vector<double> norm11;
  std::vector<int> landmark_columns;
  double raw_min = 0, raw_max = 0;  // frozen normalization constants
};

// Five columns straddling the image center, matching the dome's footprint
// on the default geometry.
inline std::vector<int> default_landmark_columns(int width) {
  const int center = width / 2;
  const int step = std::max(1, width / 24);
  return {center - 2 * step, center - step, center, center + step,
          center + 2 * step};
}

namespace detail {

inline double track_column(const SliceGrid& g, int col, int r0, int r1,
                           double min_gradient, int record_index) {
  const int lo = std::max(r0, 1);
  const int hi = std::min(r1, g.rows - 2);
  require(lo + 1 < hi, ErrorCode::kConfig, "tracker: roi too small");
  auto grad = [&](int r) {
    return (g.at(r + 1, col) - g.at(r - 1, col)) / 2.0;
  };
  int best = -1;
  double best_g = min_gradient;
  for (int r = lo; r <= hi; ++r) {
    const double gr = grad(r);
    if (gr > best_g) {
      best_g = gr;
      best = r;
    }
  }
  require(best >= 0, ErrorCode::kTracking,
          strprintf("tracker: no gradient above threshold in column %d of "
                    "record %d",
                    col, record_index));
  double delta = 0;
  if (best > lo && best < hi) {
    const double gm = grad(best - 1), g0 = grad(best), gp = grad(best + 1);
    const double denom = gm - 2 * g0 + gp;
    if (denom != 0) delta = std::clamp(0.5 * (gm - gp) / denom, -0.5, 0.5);
  }
  return best + delta;
}

}  // namespace detail

// Tracks the diaphragm edge in each navigator. Normalization min/max is
// computed over the first `norm_count` samples (all when negative) and
// frozen into the signal.
inline SurrogateSignal track_diaphragm(
    const std::vector<const SliceRecord*>& navigators,
    const TrackerConfig& cfg, int norm_count = -1) {
  require(!navigators.empty(), ErrorCode::kConfig,
          "track_diaphragm: no navigator records");
  SurrogateSignal sig;
  sig.landmark_columns = cfg.columns.empty()
                             ? default_landmark_columns(
                                   navigators.front()->pixels.cols)
                             : cfg.columns;
  require(sig.landmark_columns.size() == 5, ErrorCode::kConfig,
          "track_diaphragm: exactly five landmark columns expected");
  for (int c : sig.landmark_columns) {
    require(c >= 0 && c < navigators.front()->pixels.cols, ErrorCode::kConfig,
            strprintf("track_diaphragm: column %d outside slice width", c));
  }
  for (const SliceRecord* rec : navigators) {
    require(rec->kind == SliceKind::kNavigator, ErrorCode::kConfig,
            "track_diaphragm: non-navigator record");
    double mean = 0;
    for (int c : sig.landmark_columns) {
      mean += detail::track_column(rec->pixels, c, cfg.roi_row_min,
                                   cfg.roi_row_max, cfg.min_gradient,
                                   rec->index);
    }
    sig.raw.push_back(mean / 5.0);
    sig.timestamps.push_back(rec->timestamp);
  }

  const int count = norm_count < 0
                        ? static_cast<int>(sig.raw.size())
                        : std::min<int>(norm_count, sig.raw.size());
  require(count >= 2, ErrorCode::kConfig,
          "track_diaphragm: need at least two samples for normalization");
  sig.raw_min = *std::min_element(sig.raw.begin(), sig.raw.begin() + count);
  sig.raw_max = *std::max_element(sig.raw.begin(), sig.raw.begin() + count);
  require(sig.raw_max > sig.raw_min, ErrorCode::kDomain,
          "track_diaphragm: degenerate signal range (max == min)");
  for (double r : sig.raw) {
    const double n01 = (r - sig.raw_min) / (sig.raw_max - sig.raw_min);
    sig.norm01.push_back(n01);
    sig.norm11.push_back(2.0 * n01 - 1.0);
  }
  return sig;
}

inline std::vector<const SliceRecord*> navigator_records(
    const SliceDataset& ds) {
  std::vector<const SliceRecord*> navs;
  for (const auto& r : ds.records)
    if (r.kind == SliceKind::kNavigator) navs.push_back(&r);
  return navs;
}

// Dataset-level helper: tracks every navigator but freezes normalization on
// the training prefix (num/den of the record sequence).
inline SurrogateSignal surrogate_for_dataset(const SliceDataset& ds,
                                             const TrackerConfig& cfg,
                                             long num = 11, long den = 12) {
  auto navs = navigator_records(ds);
  const long boundary = static_cast<long>(ds.records.size()) * num / den;
  int in_train = 0;
  for (const auto* n : navs)
    if (n->index < boundary) ++in_train;
  return track_diaphragm(navs, cfg, in_train);
}

// State for a record in [-1, 1] units: navigators take their own sample,
// coronal slices interpolate between the two bracketing navigator samples.
inline double state_for_record(const SurrogateSignal& sig,
                               const SliceRecord& rec) {
  require(!sig.timestamps.empty(), ErrorCode::kConfig,
          "state_for_record: empty signal");
  const double t = rec.timestamp;
  require(t >= sig.timestamps.front() && t <= sig.timestamps.back(),
          ErrorCode::kDomain,
          strprintf("state_for_record: record %d at t=%.4f outside the "
                    "signal range [%.4f, %.4f]; extrapolation is not defined",
                    rec.index, t, sig.timestamps.front(),
                    sig.timestamps.back()));
  auto it = std::lower_bound(sig.timestamps.begin(), sig.timestamps.end(), t);
  const size_t hi = static_cast<size_t>(it - sig.timestamps.begin());
  if (sig.timestamps[hi] == t) return sig.norm11[hi];
  const size_t lo = hi - 1;
  const double w =
      (t - sig.timestamps[lo]) / (sig.timestamps[hi] - sig.timestamps[lo]);
  return sig.norm11[lo] + w * (sig.norm11[hi] - sig.norm11[lo]);
}

// Signal file: CSV with columns timestamp, raw, norm01, norm11; the frozen
// normalization constants ride along in a comment line.
inline void save_signal(const std::string& path, const SurrogateSignal& sig) {
  std::ofstream f(path);
  require(f.good(), ErrorCode::kIo, "cannot write signal csv: " + path);
  f << "# raw_min=" << format_g17(sig.raw_min)
    << " raw_max=" << format_g17(sig.raw_max) << " columns=";
  for (size_t i = 0; i < sig.landmark_columns.size(); ++i)
    f << (i ? ";" : "") << sig.landmark_columns[i];
  f << "\n";
  f << "timestamp,raw,norm01,norm11\n";
  for (size_t i = 0; i < sig.raw.size(); ++i) {
    f << format_g17(sig.timestamps[i]) << "," << format_g17(sig.raw[i]) << ","
      << format_g17(sig.norm01[i]) << "," << format_g17(sig.norm11[i]) << "\n";
  }
  require(f.good(), ErrorCode::kIo, "signal write failed: " + path);
}

inline SurrogateSignal load_signal(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), ErrorCode::kMissingFile, "cannot open signal csv: " + path);
  SurrogateSignal sig;
  std::string line;
  require(static_cast<bool>(std::getline(f, line)) && line.rfind("# raw_min=", 0) == 0,
          ErrorCode::kIo, "bad signal csv header in " + path);
  {
    std::istringstream ss(line.substr(1));
    std::string tok;
    while (ss >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
      if (key == "raw_min") {
        sig.raw_min = std::stod(val);
      } else if (key == "raw_max") {
        sig.raw_max = std::stod(val);
      } else if (key == "columns") {
        std::stringstream cs(val);
        std::string c;
        while (std::getline(cs, c, ';'))
          if (!c.empty()) sig.landmark_columns.push_back(std::stoi(c));
      }
    }
  }
  require(static_cast<bool>(std::getline(f, line)) &&
              line == "timestamp,raw,norm01,norm11",
          ErrorCode::kIo, "bad signal csv columns in " + path);
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    double v[4] = {0, 0, 0, 0};
    for (int i = 0; i < 4; ++i) {
      require(static_cast<bool>(std::getline(ss, cell, ',')), ErrorCode::kIo,
              "bad signal row in " + path + ": " + line);
      v[i] = std::stod(cell);
    }
    sig.timestamps.push_back(v[0]);
    sig.raw.push_back(v[1]);
    sig.norm01.push_back(v[2]);
    sig.norm11.push_back(v[3]);
  }
  require(sig.raw.size() >= 2, ErrorCode::kIo,
          "signal csv has fewer than two samples: " + path);
  return sig;
}

}  // namespace cpt4d
