// Copyright 2026 The cpt4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Voxel containers and their file formats.
//
// Volume file ("CVOL"): "CPT4D-VOL\n", text header lines (dims, spacing,
// amplitude, seed), a "data" line, then raw little-endian float32 voxels in
// x-fastest order. Slice files use the 2D variant with a "CPT4D-SLC\n"
// magic. Graymap export writes binary PGM with round-half-up quantization.

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cpt4d/common.hpp"

namespace cpt4d {

static_assert(std::endian::native == std::endian::little,
              "volume io assumes a little-endian host");

inline constexpr const char* kVolumeMagic = "CPT4D-VOL";
inline constexpr const char* kSliceMagic = "CPT4D-SLC";

struct VolumeGrid {
  int nx = 0, ny = 0, nz = 0;
  double sx = 1, sy = 1, sz = 1;
  double amplitude = 0;
  std::uint64_t seed = 0;
  std::vector<float> voxels;  // index (k*ny + j)*nx + i

  VolumeGrid() = default;
  VolumeGrid(int nx_, int ny_, int nz_, double sx_, double sy_, double sz_)
      : nx(nx_), ny(ny_), nz(nz_), sx(sx_), sy(sy_), sz(sz_),
        voxels(static_cast<size_t>(nx_) * ny_ * nz_, 0.f) {}

  float& at(int i, int j, int k) {
    return voxels[(static_cast<size_t>(k) * ny + j) * nx + i];
  }
  float at(int i, int j, int k) const {
    return voxels[(static_cast<size_t>(k) * ny + j) * nx + i];
  }
  size_t size() const { return voxels.size(); }
};

// One 2D pixel grid; rows index the through-plane image axis stored first.
struct SliceGrid {
  int rows = 0, cols = 0;
  double srow = 1, scol = 1;
  double amplitude = 0;
  std::uint64_t seed = 0;
  std::vector<float> pixels;  // row-major

  SliceGrid() = default;
  SliceGrid(int r, int c, double sr, double sc)
      : rows(r), cols(c), srow(sr), scol(sc),
        pixels(static_cast<size_t>(r) * c, 0.f) {}

  float& at(int r, int c) { return pixels[static_cast<size_t>(r) * cols + c]; }
  float at(int r, int c) const {
    return pixels[static_cast<size_t>(r) * cols + c];
  }
};

namespace detail {

inline void write_f32(std::ofstream& f, const std::vector<float>& v) {
  f.write(reinterpret_cast<const char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(float)));
}

inline void read_f32(std::ifstream& f, std::vector<float>& v,
                     const std::string& path) {
  f.read(reinterpret_cast<char*>(v.data()),
         static_cast<std::streamsize>(v.size() * sizeof(float)));
  require(f.gcount() == static_cast<std::streamsize>(v.size() * sizeof(float)),
          ErrorCode::kIo, "truncated voxel data in " + path);
}

inline std::string expect_line(std::ifstream& f, const std::string& path) {
  std::string line;
  require(static_cast<bool>(std::getline(f, line)), ErrorCode::kIo,
          "truncated header in " + path);
  return line;
}

}  // namespace detail

inline void save_volume(const std::string& path, const VolumeGrid& v) {
  std::ofstream f(path, std::ios::binary);
  require(f.good(), ErrorCode::kIo, "cannot open volume for write: " + path);
  f << kVolumeMagic << "\n";
  f << "dims " << v.nx << " " << v.ny << " " << v.nz << "\n";
  f << "spacing " << format_g17(v.sx) << " " << format_g17(v.sy) << " "
    << format_g17(v.sz) << "\n";
  f << "amplitude " << format_g17(v.amplitude) << "\n";
  f << "seed " << v.seed << "\n";
  f << "data\n";
  detail::write_f32(f, v.voxels);
  require(f.good(), ErrorCode::kIo, "volume write failed: " + path);
}

inline VolumeGrid load_volume(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorCode::kMissingFile, "cannot open volume: " + path);
  require(detail::expect_line(f, path) == kVolumeMagic, ErrorCode::kIo,
          "bad volume magic in " + path);
  VolumeGrid v;
  std::string key;
  {
    std::istringstream ss(detail::expect_line(f, path));
    ss >> key >> v.nx >> v.ny >> v.nz;
    require(key == "dims" && v.nx > 0 && v.ny > 0 && v.nz > 0, ErrorCode::kIo,
            "bad dims line in " + path);
  }
  {
    std::istringstream ss(detail::expect_line(f, path));
    ss >> key >> v.sx >> v.sy >> v.sz;
    require(key == "spacing", ErrorCode::kIo, "bad spacing line in " + path);
  }
  {
    std::istringstream ss(detail::expect_line(f, path));
    ss >> key >> v.amplitude;
    require(key == "amplitude", ErrorCode::kIo, "bad amplitude line in " + path);
  }
  {
    std::istringstream ss(detail::expect_line(f, path));
    ss >> key >> v.seed;
    require(key == "seed", ErrorCode::kIo, "bad seed line in " + path);
  }
  require(detail::expect_line(f, path) == "data", ErrorCode::kIo,
          "missing data marker in " + path);
  v.voxels.assign(static_cast<size_t>(v.nx) * v.ny * v.nz, 0.f);
  detail::read_f32(f, v.voxels, path);
  return v;
}

inline void save_slice(const std::string& path, const SliceGrid& s) {
  std::ofstream f(path, std::ios::binary);
  require(f.good(), ErrorCode::kIo, "cannot open slice for write: " + path);
  f << kSliceMagic << "\n";
  f << "dims " << s.rows << " " << s.cols << "\n";
  f << "spacing " << format_g17(s.srow) << " " << format_g17(s.scol) << "\n";
  f << "amplitude " << format_g17(s.amplitude) << "\n";
  f << "seed " << s.seed << "\n";
  f << "data\n";
  detail::write_f32(f, s.pixels);
  require(f.good(), ErrorCode::kIo, "slice write failed: " + path);
}

inline SliceGrid load_slice(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorCode::kMissingFile, "cannot open slice: " + path);
  require(detail::expect_line(f, path) == kSliceMagic, ErrorCode::kIo,
          "bad slice magic in " + path);
  SliceGrid s;
  std::string key;
  {
    std::istringstream ss(detail::expect_line(f, path));
    ss >> key >> s.rows >> s.cols;
    require(key == "dims" && s.rows > 0 && s.cols > 0, ErrorCode::kIo,
            "bad dims line in " + path);
  }
  {
    std::istringstream ss(detail::expect_line(f, path));
    ss >> key >> s.srow >> s.scol;
    require(key == "spacing", ErrorCode::kIo, "bad spacing line in " + path);
  }
  {
    std::istringstream ss(detail::expect_line(f, path));
    ss >> key >> s.amplitude;
    require(key == "amplitude", ErrorCode::kIo, "bad amplitude line in " + path);
  }
  {
    std::istringstream ss(detail::expect_line(f, path));
    ss >> key >> s.seed;
    require(key == "seed", ErrorCode::kIo, "bad seed line in " + path);
  }
  require(detail::expect_line(f, path) == "data", ErrorCode::kIo,
          "missing data marker in " + path);
  s.pixels.assign(static_cast<size_t>(s.rows) * s.cols, 0.f);
  detail::read_f32(f, s.pixels, path);
  return s;
}

inline unsigned char quantize_u8(double v) {
  double q = std::floor(v * 255.0 + 0.5);
  if (q < 0) q = 0;
  if (q > 255) q = 255;
  return static_cast<unsigned char>(q);
}

inline void save_pgm(const std::string& path, const float* data, int rows,
                     int cols) {
  std::ofstream f(path, std::ios::binary);
  require(f.good(), ErrorCode::kIo, "cannot open pgm for write: " + path);
  f << "P5\n" << cols << " " << rows << "\n255\n";
  std::vector<unsigned char> buf(static_cast<size_t>(rows) * cols);
  for (size_t i = 0; i < buf.size(); ++i) buf[i] = quantize_u8(data[i]);
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size()));
  require(f.good(), ErrorCode::kIo, "pgm write failed: " + path);
}

}  // namespace cpt4d
