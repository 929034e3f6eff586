// Copyright 2026 The cpt4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Text manifest stored next to the two network checkpoints: the training
// geometry, the frozen surrogate normalization constants, and the units the
// motion network emits (normalized coordinates under the training
// convention; voxel units trigger the 2/size rescale at reconstruction).

#include <fstream>
#include <sstream>
#include <string>

#include "cpt4d/acquisition.hpp"
#include "cpt4d/common.hpp"

namespace cpt4d {

enum class DvfUnits { kNormalized, kVoxel };

struct ModelManifest {
  DatasetGeometry geom;
  double surrogate_raw_min = 0;
  double surrogate_raw_max = 1;
  DvfUnits dvf_units = DvfUnits::kNormalized;
  std::string precision = "f64";
  int navigator_x = 0;
};

inline constexpr const char* kManifestMagic = "CPT4D-MANIFEST";

inline void save_manifest(const std::string& path, const ModelManifest& m) {
  std::ofstream f(path);
  require(f.good(), ErrorCode::kIo, "cannot write manifest: " + path);
  f << kManifestMagic << "\n";
  f << "dims " << m.geom.nx << " " << m.geom.ny << " " << m.geom.nz << "\n";
  f << "spacing " << format_g17(m.geom.sx) << " " << format_g17(m.geom.sy)
    << " " << format_g17(m.geom.sz) << "\n";
  f << "surrogate_raw_min " << format_g17(m.surrogate_raw_min) << "\n";
  f << "surrogate_raw_max " << format_g17(m.surrogate_raw_max) << "\n";
  f << "dvf_units "
    << (m.dvf_units == DvfUnits::kNormalized ? "normalized" : "voxel") << "\n";
  f << "precision " << m.precision << "\n";
  f << "navigator_x " << m.navigator_x << "\n";
  require(f.good(), ErrorCode::kIo, "manifest write failed: " + path);
}

inline ModelManifest load_manifest(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), ErrorCode::kMissingFile, "cannot open manifest: " + path);
  std::string line;
  require(static_cast<bool>(std::getline(f, line)) && line == kManifestMagic,
          ErrorCode::kIo, "bad manifest magic in " + path);
  ModelManifest m;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "dims") {
      ss >> m.geom.nx >> m.geom.ny >> m.geom.nz;
    } else if (key == "spacing") {
      ss >> m.geom.sx >> m.geom.sy >> m.geom.sz;
    } else if (key == "surrogate_raw_min") {
      ss >> m.surrogate_raw_min;
    } else if (key == "surrogate_raw_max") {
      ss >> m.surrogate_raw_max;
    } else if (key == "dvf_units") {
      std::string u;
      ss >> u;
      if (u == "normalized") {
        m.dvf_units = DvfUnits::kNormalized;
      } else if (u == "voxel") {
        m.dvf_units = DvfUnits::kVoxel;
      } else {
        fail(ErrorCode::kIo, "unknown dvf_units in " + path + ": " + u);
      }
    } else if (key == "precision") {
      ss >> m.precision;
    } else if (key == "navigator_x") {
      ss >> m.navigator_x;
    } else {
      fail(ErrorCode::kIo, "unknown manifest key in " + path + ": " + key);
    }
    require(static_cast<bool>(ss), ErrorCode::kIo,
            "bad manifest line in " + path + ": " + line);
  }
  require(m.geom.nx > 0 && m.geom.ny > 0 && m.geom.nz > 0, ErrorCode::kIo,
          "manifest missing dims in " + path);
  return m;
}

}  // namespace cpt4d
