// Copyright 2026 The cpt4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Flat key = value run configuration. Every key is registered with a
// default; unknown keys are errors, and each command writes its fully
// resolved configuration next to its outputs so any artifact can be
// reproduced from that file plus the seed.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cpt4d/common.hpp"

namespace cpt4d {

class RunConfig {
 public:
  RunConfig() { register_defaults(); }

  void load_file(const std::string& path) {
    std::ifstream f(path);
    require(f.good(), ErrorCode::kMissingFile, "cannot open config: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
      ++lineno;
      const std::string trimmed = trim(line);
      if (trimmed.empty() || trimmed[0] == '#') continue;
      const auto eq = trimmed.find('=');
      require(eq != std::string::npos, ErrorCode::kConfig,
              strprintf("%s:%d: expected key = value", path.c_str(), lineno));
      set(trim(trimmed.substr(0, eq)), trim(trimmed.substr(eq + 1)));
    }
  }

  void set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    require(it != values_.end(), ErrorCode::kConfig,
            "unknown config key: " + key);
    it->second = value;
  }

  const std::string& get_string(const std::string& key) const {
    auto it = values_.find(key);
    require(it != values_.end(), ErrorCode::kConfig,
            "unknown config key: " + key);
    return it->second;
  }

  long get_long(const std::string& key) const {
    const std::string& s = get_string(key);
    size_t pos = 0;
    long v = 0;
    try {
      v = std::stol(s, &pos);
    } catch (const std::exception&) {
      fail(ErrorCode::kConfig, "config " + key + ": not an integer: " + s);
    }
    require(pos == s.size(), ErrorCode::kConfig,
            "config " + key + ": not an integer: " + s);
    return v;
  }

  std::uint64_t get_u64(const std::string& key) const {
    const std::string& s = get_string(key);
    size_t pos = 0;
    std::uint64_t v = 0;
    try {
      v = std::stoull(s, &pos);
    } catch (const std::exception&) {
      fail(ErrorCode::kConfig, "config " + key + ": not an integer: " + s);
    }
    require(pos == s.size(), ErrorCode::kConfig,
            "config " + key + ": not an integer: " + s);
    return v;
  }

  double get_double(const std::string& key) const {
    const std::string& s = get_string(key);
    size_t pos = 0;
    double v = 0;
    try {
      v = std::stod(s, &pos);
    } catch (const std::exception&) {
      fail(ErrorCode::kConfig, "config " + key + ": not a number: " + s);
    }
    require(pos == s.size(), ErrorCode::kConfig,
            "config " + key + ": not a number: " + s);
    return v;
  }

  bool get_bool(const std::string& key) const {
    const std::string& s = get_string(key);
    if (s == "1" || s == "true" || s == "on") return true;
    if (s == "0" || s == "false" || s == "off") return false;
    fail(ErrorCode::kConfig, "config " + key + ": not a boolean: " + s);
  }

  // "11/12" or a plain decimal such as "0.5" (converted to digits/10^k).
  std::pair<long, long> get_fraction(const std::string& key) const {
    const std::string& s = get_string(key);
    const auto slash = s.find('/');
    long num = 0, den = 1;
    if (slash != std::string::npos) {
      try {
        num = std::stol(s.substr(0, slash));
        den = std::stol(s.substr(slash + 1));
      } catch (const std::exception&) {
        fail(ErrorCode::kConfig, "config " + key + ": bad fraction: " + s);
      }
    } else {
      const auto dot = s.find('.');
      try {
        if (dot == std::string::npos) {
          num = std::stol(s);
        } else {
          const std::string digits = s.substr(0, dot) + s.substr(dot + 1);
          num = std::stol(digits);
          for (size_t i = dot + 1; i < s.size(); ++i) den *= 10;
        }
      } catch (const std::exception&) {
        fail(ErrorCode::kConfig, "config " + key + ": bad fraction: " + s);
      }
    }
    require(den > 0 && num > 0 && num < den, ErrorCode::kConfig,
            "config " + key + ": fraction must lie in (0, 1): " + s);
    return {num, den};
  }

  std::vector<double> get_double_list(const std::string& key) const {
    const std::string& s = get_string(key);
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      size_t pos = 0;
      double v = 0;
      try {
        v = std::stod(item, &pos);
      } catch (const std::exception&) {
        fail(ErrorCode::kConfig, "config " + key + ": bad list entry: " + item);
      }
      require(pos == item.size(), ErrorCode::kConfig,
              "config " + key + ": bad list entry: " + item);
      out.push_back(v);
    }
    return out;
  }

  std::vector<int> get_int_list(const std::string& key) const {
    std::vector<int> out;
    for (double v : get_double_list(key)) out.push_back(static_cast<int>(v));
    return out;
  }

  void save(const std::string& path) const {
    std::ofstream f(path);
    require(f.good(), ErrorCode::kIo, "cannot write config: " + path);
    for (const auto& [k, v] : values_) f << k << " = " << v << "\n";
    require(f.good(), ErrorCode::kIo, "config write failed: " + path);
  }

 private:
  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  void register_defaults() {
    values_ = {
        {"seed", "42"},
        {"workdir", "run"},
        // phantom
        {"phantom_nx", "96"},
        {"phantom_ny", "96"},
        {"phantom_nz", "64"},
        {"phantom_sx", "2"},
        {"phantom_sy", "2"},
        {"phantom_sz", "3.5"},
        {"phantom_seed", "7"},
        {"phantom_antialias", "1"},
        {"phantom_liver_edge_mm", "5"},
        {"phantom_vessels_per_lung", "7"},
        {"phantom_amplitudes", "0,0.25,0.5,0.75,1"},
        // ground-truth motion
        {"motion_dz_mm", "18"},
        {"motion_decay_mm", "80"},
        {"motion_ap_coupling", "0.15"},
        // breathing
        {"breath_period_s", "4"},
        {"breath_period_jitter", "0.12"},
        {"breath_depth_jitter", "0.22"},
        {"breath_drift", "0.05"},
        {"breath_dt_s", "0.32"},
        {"breath_duration_s", "0"},  // 0 derives from the acquisition length
        {"breath_seed", "21"},
        // acquisition
        {"acq_positions", "20"},
        {"acq_sweeps", "18"},
        {"acq_y0", "28"},
        {"acq_stride", "2"},
        {"acq_navigator_x", "67"},
        {"split_fraction", "11/12"},
        // tracker
        {"tracker_roi_min", "18"},
        {"tracker_roi_max", "34"},
        {"tracker_min_gradient", "0.02"},
        {"tracker_columns", ""},  // empty selects five centered columns
        // training
        {"train_epochs", "2000"},
        {"train_meta_batch", "8"},
        {"train_points", "10000"},
        {"train_lr", "5e-5"},
        {"train_beta1", "0.9"},
        {"train_beta2", "0.999"},
        {"train_eps", "1e-8"},
        {"train_lambda", "0.05"},
        {"train_tmn_depth", "4"},
        {"train_tmn_width", "256"},
        {"train_tmn_omega0", "30"},
        {"train_tmn_omega_hidden", "1"},
        {"train_san_depth", "5"},
        {"train_san_width", "512"},
        {"train_san_omega0", "30"},
        {"train_san_omega_hidden", "1"},
        {"train_data_fraction", "1"},
        {"train_checkpoint_every", "200"},
        {"train_precision", "f64"},
        // sorting baseline
        {"sort_bins", "10"},
        // reconstruction
        {"recon_states", "0.5"},
        {"recon_state_kind", "norm01"},
        {"recon_batch_points", "65536"},
        {"recon_clamp", "warn"},
        {"recon_export_pgm", "0"},
        {"recon_export_mip", "0"},
    };
  }

  std::map<std::string, std::string> values_;
};

}  // namespace cpt4d
