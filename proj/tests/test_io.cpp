// Copyright 2026 The cpt4d Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>

#include "cpt4d/manifest.hpp"
#include "cpt4d/volume.hpp"
#include "test_support.hpp"

using namespace cpt4d;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), {});
}

std::filesystem::path tmpdir() {
  auto d = std::filesystem::temp_directory_path() / "cpt4d_io_test";
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("volume file round trip") {
  VolumeGrid v(7, 5, 3, 2.0, 2.0, 3.5);
  v.amplitude = 0.37;
  v.seed = 99;
  Rng rng(4);
  for (auto& x : v.voxels) x = static_cast<float>(rng.next_unit());

  auto path = (tmpdir() / "vol.cvol").string();
  save_volume(path, v);
  auto w = load_volume(path);
  REQUIRE(w.nx == 7);
  REQUIRE(w.ny == 5);
  REQUIRE(w.nz == 3);
  REQUIRE(w.sx == 2.0);
  REQUIRE(w.sz == 3.5);
  REQUIRE(w.amplitude == 0.37);
  REQUIRE(w.seed == 99);
  REQUIRE(w.voxels == v.voxels);

  // Re-saving reproduces the file byte for byte.
  auto path2 = (tmpdir() / "vol2.cvol").string();
  save_volume(path2, w);
  REQUIRE(slurp(path) == slurp(path2));

  // The header is the documented magic.
  REQUIRE(slurp(path).substr(0, 10) == "CPT4D-VOL\n");

  // Corrupt magic is rejected.
  std::ofstream bad(tmpdir() / "bad.cvol", std::ios::binary);
  bad << "CPT4D-XXX\n";
  bad.close();
  REQUIRE_THROWS_AS(load_volume((tmpdir() / "bad.cvol").string()), Error);
  REQUIRE_THROWS_AS(load_volume((tmpdir() / "missing.cvol").string()), Error);
}

TEST_CASE("slice file round trip") {
  SliceGrid s(9, 4, 3.5, 2.0);
  s.amplitude = 0.5;
  Rng rng(5);
  for (auto& x : s.pixels) x = static_cast<float>(rng.next_unit());
  auto path = (tmpdir() / "s.slc").string();
  save_slice(path, s);
  auto t = load_slice(path);
  REQUIRE(t.rows == 9);
  REQUIRE(t.cols == 4);
  REQUIRE(t.srow == 3.5);
  REQUIRE(t.pixels == s.pixels);
  REQUIRE(slurp(path).substr(0, 10) == "CPT4D-SLC\n");
}

TEST_CASE("pgm export quantizes round-half-up") {
  REQUIRE(quantize_u8(0.0) == 0);
  REQUIRE(quantize_u8(1.0) == 255);
  REQUIRE(quantize_u8(1.5) == 255);   // clamped
  REQUIRE(quantize_u8(-0.3) == 0);    // clamped
  REQUIRE(quantize_u8(100.5 / 255.0) == 101);
  REQUIRE(quantize_u8(100.4999 / 255.0) == 100);

  SliceGrid g(2, 3, 1, 1);
  g.at(0, 0) = 0.0f;
  g.at(0, 1) = 0.5f;
  g.at(0, 2) = 1.0f;
  g.at(1, 0) = 0.25f;
  auto path = (tmpdir() / "img.pgm").string();
  save_pgm(path, g.pixels.data(), g.rows, g.cols);
  auto bytes = slurp(path);
  REQUIRE(bytes.substr(0, 3) == "P5\n");
  REQUIRE(bytes.find("3 2\n255\n") != std::string::npos);
  const auto* px = reinterpret_cast<const unsigned char*>(
      bytes.data() + bytes.size() - 6);
  REQUIRE(px[0] == 0);
  REQUIRE(px[1] == 128);  // 0.5 * 255 + 0.5 floors to 128
  REQUIRE(px[2] == 255);
  REQUIRE(px[3] == 64);
}

TEST_CASE("model manifest round trip") {
  ModelManifest m;
  m.geom = {96, 96, 64, 2, 2, 3.5};
  m.surrogate_raw_min = 22.25;
  m.surrogate_raw_max = 28.75;
  m.dvf_units = DvfUnits::kVoxel;
  m.precision = "f32";
  m.navigator_x = 67;
  auto path = (tmpdir() / "model.manifest").string();
  save_manifest(path, m);
  auto n = load_manifest(path);
  REQUIRE(n.geom.nx == 96);
  REQUIRE(n.geom.sz == 3.5);
  REQUIRE(n.surrogate_raw_min == 22.25);
  REQUIRE(n.surrogate_raw_max == 28.75);
  REQUIRE(n.dvf_units == DvfUnits::kVoxel);
  REQUIRE(n.precision == "f32");
  REQUIRE(n.navigator_x == 67);

  std::ofstream bad(tmpdir() / "bad.manifest");
  bad << kManifestMagic << "\nnot_a_key 3\n";
  bad.close();
  REQUIRE_THROWS_AS(load_manifest((tmpdir() / "bad.manifest").string()),
                    Error);
}
