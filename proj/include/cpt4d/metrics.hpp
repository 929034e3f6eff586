// Copyright 2026 The cpt4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Quantitative evaluation. Image quality: MAE, MSE, PSNR (peak 1.0, with an
// "identical" sentinel when MSE is zero) and SSIM with the standard 11x11
// Gaussian window (sigma 1.5, C1 = 0.01^2, C2 = 0.03^2, dynamic range 1,
// valid windows only, mean over windows). Motion quality: mean absolute
// error between diaphragm trajectories tracked on predicted and reference
// navigator sequences, each re-normalized to [0, 1] first.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "cpt4d/manifest.hpp"
#include "cpt4d/networks.hpp"
#include "cpt4d/parallel.hpp"
#include "cpt4d/surrogate.hpp"

namespace cpt4d {

struct ImageMetrics {
  double mae = 0;
  double mse = 0;
  double psnr = 0;       // valid when !identical
  bool identical = false;
  double ssim = 1;
};

namespace detail {

inline std::vector<double> gaussian_kernel11() {
  std::vector<double> k(11);
  double sum = 0;
  for (int i = 0; i < 11; ++i) {
    const double d = i - 5;
    k[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    sum += k[i];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Separable valid-window convolution with the 11-tap Gaussian.
inline void gauss_filter_valid(const std::vector<double>& img, int rows,
                               int cols, std::vector<double>& out,
                               int& orows, int& ocols) {
  static const std::vector<double> k = gaussian_kernel11();
  orows = rows - 10;
  ocols = cols - 10;
  std::vector<double> tmp(static_cast<size_t>(rows) * ocols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < ocols; ++c) {
      double s = 0;
      for (int t = 0; t < 11; ++t) s += k[t] * img[r * cols + c + t];
      tmp[r * ocols + c] = s;
    }
  }
  out.assign(static_cast<size_t>(orows) * ocols, 0.0);
  for (int r = 0; r < orows; ++r) {
    for (int c = 0; c < ocols; ++c) {
      double s = 0;
      for (int t = 0; t < 11; ++t) s += k[t] * tmp[(r + t) * ocols + c];
      out[r * ocols + c] = s;
    }
  }
}

}  // namespace detail

inline double ssim_11x11(const std::vector<double>& a,
                         const std::vector<double>& b, int rows, int cols) {
  require(rows >= 11 && cols >= 11, ErrorCode::kShape,
          "ssim: image smaller than the 11x11 window");
  require(a.size() == b.size() &&
              a.size() == static_cast<size_t>(rows) * cols,
          ErrorCode::kShape, "ssim: shape mismatch");
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  std::vector<double> mu_a, mu_b, m_aa, m_bb, m_ab;
  int orows = 0, ocols = 0;
  detail::gauss_filter_valid(a, rows, cols, mu_a, orows, ocols);
  detail::gauss_filter_valid(b, rows, cols, mu_b, orows, ocols);
  detail::gauss_filter_valid(aa, rows, cols, m_aa, orows, ocols);
  detail::gauss_filter_valid(bb, rows, cols, m_bb, orows, ocols);
  detail::gauss_filter_valid(ab, rows, cols, m_ab, orows, ocols);
  double acc = 0;
  const size_t n = static_cast<size_t>(orows) * ocols;
  for (size_t i = 0; i < n; ++i) {
    const double va = m_aa[i] - mu_a[i] * mu_a[i];
    const double vb = m_bb[i] - mu_b[i] * mu_b[i];
    const double cov = m_ab[i] - mu_a[i] * mu_b[i];
    acc += ((2 * mu_a[i] * mu_b[i] + c1) * (2 * cov + c2)) /
           ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
  }
  return acc / static_cast<double>(n);
}

inline ImageMetrics image_metrics(const std::vector<double>& pred,
                                  const std::vector<double>& gt, int rows,
                                  int cols) {
  require(pred.size() == gt.size() &&
              pred.size() == static_cast<size_t>(rows) * cols,
          ErrorCode::kShape, "image_metrics: shape mismatch");
  require(!pred.empty(), ErrorCode::kShape, "image_metrics: empty image");
  ImageMetrics m;
  double ae = 0, se = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - gt[i];
    ae += std::abs(d);
    se += d * d;
  }
  m.mae = ae / pred.size();
  m.mse = se / pred.size();
  if (m.mse == 0) {
    m.identical = true;
    m.psnr = 0;
  } else {
    m.psnr = 10.0 * std::log10(1.0 / m.mse);
  }
  m.ssim = ssim_11x11(pred, gt, rows, cols);
  return m;
}

inline std::vector<double> slice_to_doubles(const SliceGrid& g) {
  return std::vector<double>(g.pixels.begin(), g.pixels.end());
}

// Independent [0, 1] re-normalization of one trajectory.
inline std::vector<double> renormalize01(const std::vector<double>& v) {
  require(v.size() >= 2, ErrorCode::kShape,
          "trajectory: need at least two samples");
  const double lo = *std::min_element(v.begin(), v.end());
  const double hi = *std::max_element(v.begin(), v.end());
  require(hi > lo, ErrorCode::kDomain, "trajectory: degenerate range");
  std::vector<double> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - lo) / (hi - lo);
  return out;
}

namespace detail {

inline std::vector<double> track_grids(const std::vector<SliceGrid>& grids,
                                       const TrackerConfig& cfg) {
  std::vector<SliceRecord> recs(grids.size());
  std::vector<const SliceRecord*> ptrs;
  for (size_t i = 0; i < grids.size(); ++i) {
    recs[i].index = static_cast<int>(i);
    recs[i].kind = SliceKind::kNavigator;
    recs[i].timestamp = static_cast<double>(i);
    recs[i].pixels = grids[i];
    ptrs.push_back(&recs[i]);
  }
  return track_diaphragm(ptrs, cfg).raw;
}

}  // namespace detail

// Tracks the diaphragm on both navigator sequences with the shared tracker
// configuration and compares the [0, 1]-renormalized trajectories.
inline double trajectory_mae(const std::vector<SliceGrid>& pred_navs,
                             const std::vector<SliceGrid>& gt_navs,
                             const TrackerConfig& cfg) {
  require(pred_navs.size() == gt_navs.size() && !pred_navs.empty(),
          ErrorCode::kShape, "trajectory_mae: sequence length mismatch");
  auto p = renormalize01(detail::track_grids(pred_navs, cfg));
  auto g = renormalize01(detail::track_grids(gt_navs, cfg));
  double acc = 0;
  for (size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - g[i]);
  return acc / p.size();
}

// Global-statistics SSIM-form score between the two [0, 1] trajectories.
inline double trajectory_pattern_score(const std::vector<double>& a01,
                                       const std::vector<double>& b01) {
  require(a01.size() == b01.size() && a01.size() >= 2, ErrorCode::kShape,
          "pattern score: length mismatch");
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double ma = 0, mb = 0;
  for (size_t i = 0; i < a01.size(); ++i) {
    ma += a01[i];
    mb += b01[i];
  }
  ma /= a01.size();
  mb /= b01.size();
  double va = 0, vb = 0, cov = 0;
  for (size_t i = 0; i < a01.size(); ++i) {
    va += (a01[i] - ma) * (a01[i] - ma);
    vb += (b01[i] - mb) * (b01[i] - mb);
    cov += (a01[i] - ma) * (b01[i] - mb);
  }
  va /= a01.size();
  vb /= b01.size();
  cov /= a01.size();
  return ((2 * ma * mb + c1) * (2 * cov + c2)) /
         ((ma * ma + mb * mb + c1) * (va + vb + c2));
}

struct SliceScore {
  int record_index = 0;
  SliceKind kind = SliceKind::kCoronal;
  int plane = 0;
  double timestamp = 0;
  double state01 = 0;
  ImageMetrics im;
};

struct EvalReport {
  std::vector<SliceScore> slices;
  double mae_mean = 0, mae_std = 0;
  double mse_mean = 0, mse_std = 0;
  double psnr_mean = 0, psnr_std = 0;
  double ssim_mean = 0, ssim_std = 0;
  long psnr_identical_count = 0;
  bool has_trajectory = false;
  double trajectory_mae = 0;
  double trajectory_pattern = 0;
  std::string trajectory_error;  // tracker failure on a degenerate sequence
  long out_of_range_states = 0;
};

namespace detail {

// The trajectory comparison needs a trackable edge in both sequences; a
// fresh (untrained) model has none, and the report must still be produced.
inline void fill_trajectory(EvalReport& rep,
                            const std::vector<SliceGrid>& pred_navs,
                            const std::vector<SliceGrid>& gt_navs,
                            const TrackerConfig& tracker) {
  if (pred_navs.size() < 2) return;
  try {
    rep.trajectory_mae = trajectory_mae(pred_navs, gt_navs, tracker);
    auto p = renormalize01(track_grids(pred_navs, tracker));
    auto g = renormalize01(track_grids(gt_navs, tracker));
    rep.trajectory_pattern = trajectory_pattern_score(p, g);
    rep.has_trajectory = true;
  } catch (const Error& e) {
    rep.trajectory_error = e.code_name();
  }
}

}  // namespace detail

namespace detail {

inline void aggregate_scores(EvalReport& rep) {
  require(!rep.slices.empty(), ErrorCode::kConfig,
          "evaluate: no slices scored");
  auto stats = [&](auto get, double& mean, double& stdev, bool psnr_only) {
    double m = 0;
    long n = 0;
    for (const auto& s : rep.slices) {
      if (psnr_only && s.im.identical) continue;
      m += get(s);
      ++n;
    }
    if (n == 0) {
      mean = 0;
      stdev = 0;
      return;
    }
    m /= n;
    double v = 0;
    for (const auto& s : rep.slices) {
      if (psnr_only && s.im.identical) continue;
      const double d = get(s) - m;
      v += d * d;
    }
    mean = m;
    stdev = std::sqrt(v / n);  // population std, as in the summary tables
  };
  stats([](const SliceScore& s) { return s.im.mae; }, rep.mae_mean,
        rep.mae_std, false);
  stats([](const SliceScore& s) { return s.im.mse; }, rep.mse_mean,
        rep.mse_std, false);
  stats([](const SliceScore& s) { return s.im.psnr; }, rep.psnr_mean,
        rep.psnr_std, true);
  stats([](const SliceScore& s) { return s.im.ssim; }, rep.ssim_mean,
        rep.ssim_std, false);
  for (const auto& s : rep.slices)
    if (s.im.identical) ++rep.psnr_identical_count;
}

}  // namespace detail

// Scores every validation record by sampling the composed model at the
// slice's pixel-center coordinates (no full-volume render), then tracks the
// navigator subset for the trajectory comparison. States outside [-1, 1]
// are evaluated as-is and counted.
template <class T>
EvalReport evaluate_split(const MotionNetwork<T>& motion,
                          const AnatomyNetwork<T>& anatomy,
                          const SliceDataset& val,
                          const SurrogateSignal& signal,
                          const TrackerConfig& tracker) {
  require(!val.records.empty(), ErrorCode::kConfig,
          "evaluate_split: empty validation split");
  EvalReport rep;
  rep.slices.resize(val.records.size());
  std::vector<SliceGrid> pred_grids(val.records.size());
  std::vector<long> flagged(val.records.size(), 0);

  parallel_ranges(static_cast<int>(val.records.size()), 1, [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
      const SliceRecord& rec = val.records[i];
      const double s = state_for_record(signal, rec);
      auto [coords, gt] = sample_points<T>(rec, val.geom, 0, 0, true);
      auto pred = predict_intensity(motion, anatomy, coords, T(s),
                                    StatePolicy::kPassthrough, &flagged[i]);
      std::vector<double> predd(pred.begin(), pred.end());
      std::vector<double> gtd(gt.begin(), gt.end());
      SliceScore sc;
      sc.record_index = rec.index;
      sc.kind = rec.kind;
      sc.plane = rec.plane_position;
      sc.timestamp = rec.timestamp;
      sc.state01 = (s + 1.0) / 2.0;
      sc.im = image_metrics(predd, gtd, rec.pixels.rows, rec.pixels.cols);
      rep.slices[i] = sc;
      if (rec.kind == SliceKind::kNavigator) {
        SliceGrid pg(rec.pixels.rows, rec.pixels.cols, rec.pixels.srow,
                     rec.pixels.scol);
        for (size_t p = 0; p < pred.size(); ++p)
          pg.pixels[p] = static_cast<float>(pred[p]);
        pred_grids[i] = std::move(pg);
      }
    }
  });
  for (long f : flagged) rep.out_of_range_states += f > 0 ? 1 : 0;

  std::vector<SliceGrid> pred_navs, gt_navs;
  for (size_t i = 0; i < val.records.size(); ++i) {
    if (val.records[i].kind != SliceKind::kNavigator) continue;
    pred_navs.push_back(std::move(pred_grids[i]));
    gt_navs.push_back(val.records[i].pixels);
  }
  detail::fill_trajectory(rep, pred_navs, gt_navs, tracker);
  detail::aggregate_scores(rep);
  return rep;
}

// Per-slice rows plus aggregate footer; written with round-trip-safe
// formatting so identical runs produce identical bytes.
inline void save_eval_report(const std::string& path, const EvalReport& rep) {
  std::ofstream f(path);
  require(f.good(), ErrorCode::kIo, "cannot write eval report: " + path);
  f << "record,kind,plane,timestamp,state01,mae,mse,psnr,ssim\n";
  for (const auto& s : rep.slices) {
    f << s.record_index << "," << slice_kind_name(s.kind) << "," << s.plane
      << "," << format_g17(s.timestamp) << "," << format_g17(s.state01) << ","
      << format_g17(s.im.mae) << "," << format_g17(s.im.mse) << ","
      << (s.im.identical ? std::string("identical")
                         : format_g17(s.im.psnr))
      << "," << format_g17(s.im.ssim) << "\n";
  }
  f << "aggregate,mean,,,," << format_g17(rep.mae_mean) << ","
    << format_g17(rep.mse_mean) << "," << format_g17(rep.psnr_mean) << ","
    << format_g17(rep.ssim_mean) << "\n";
  f << "aggregate,std,,,," << format_g17(rep.mae_std) << ","
    << format_g17(rep.mse_std) << "," << format_g17(rep.psnr_std) << ","
    << format_g17(rep.ssim_std) << "\n";
  if (rep.has_trajectory) {
    f << "trajectory,mae," << format_g17(rep.trajectory_mae) << "\n";
    f << "trajectory,pattern," << format_g17(rep.trajectory_pattern) << "\n";
  } else if (!rep.trajectory_error.empty()) {
    f << "trajectory,error," << rep.trajectory_error << "\n";
  }
  f << "flags,psnr_identical," << rep.psnr_identical_count << "\n";
  f << "flags,out_of_range_states," << rep.out_of_range_states << "\n";
  require(f.good(), ErrorCode::kIo, "eval report write failed: " + path);
}

}  // namespace cpt4d
