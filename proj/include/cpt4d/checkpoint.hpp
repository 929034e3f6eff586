// Copyright 2026 The cpt4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Checkpoint file: "CPT4D-CKPT\n", a text header (layer dims, omegas,
// activation tags, residual flags, Adam scalars, step count), a "data" line,
// then raw little-endian float64: per layer W row-major then b, followed by
// the Adam first moments in the same order, then the second moments.

#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cpt4d/common.hpp"
#include "cpt4d/nn.hpp"

namespace cpt4d::nn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

inline constexpr const char* kCheckpointMagic = "CPT4D-CKPT";

template <class T>
void save_checkpoint(const std::string& path, const MlpParams<T>& p,
                     const AdamState<T>& adam) {
  p.validate();
  std::ofstream f(path, std::ios::binary);
  require(f.good(), ErrorCode::kIo, "cannot open checkpoint for write: " + path);
  f << kCheckpointMagic << "\n";
  f << "layers " << p.depth() << "\n";
  f << "dims " << p.input_dim();
  for (const auto& l : p.layers) f << " " << l.w.rows;
  f << "\n";
  f << "omega";
  for (const auto& l : p.layers) f << " " << format_g17(double(l.omega));
  f << "\n";
  f << "act";
  for (const auto& l : p.layers) f << " " << act_name(l.act);
  f << "\n";
  f << "residual";
  for (const auto& l : p.layers) f << " " << (l.residual ? 1 : 0);
  f << "\n";
  f << "adam " << format_g17(adam.cfg.lr) << " " << format_g17(adam.cfg.beta1)
    << " " << format_g17(adam.cfg.beta2) << " " << format_g17(adam.cfg.eps)
    << "\n";
  f << "step " << adam.step << "\n";
  f << "data\n";
  auto write_block = [&](const Mat<T>& w, const std::vector<T>& b) {
    std::vector<double> buf;
    buf.reserve(w.size() + b.size());
    for (T v : w.d) buf.push_back(double(v));
    for (T v : b) buf.push_back(double(v));
    f.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(double)));
  };
  for (const auto& l : p.layers) write_block(l.w, l.b);
  for (size_t l = 0; l < p.layers.size(); ++l) write_block(adam.mw[l], adam.mb[l]);
  for (size_t l = 0; l < p.layers.size(); ++l) write_block(adam.vw[l], adam.vb[l]);
  require(f.good(), ErrorCode::kIo, "checkpoint write failed: " + path);
}

template <class T>
struct Checkpoint {
  MlpParams<T> params;
  AdamState<T> adam;
};

template <class T = double>
Checkpoint<T> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorCode::kMissingFile, "cannot open checkpoint: " + path);
  std::string line;
  auto next_line = [&]() {
    require(static_cast<bool>(std::getline(f, line)), ErrorCode::kIo,
            "truncated checkpoint header: " + path);
    return line;
  };
  require(next_line() == kCheckpointMagic, ErrorCode::kIo,
          "bad checkpoint magic in " + path);

  int n_layers = 0;
  {
    std::istringstream ss(next_line());
    std::string key;
    ss >> key >> n_layers;
    require(key == "layers" && n_layers > 0, ErrorCode::kIo,
            "bad layers line in " + path);
  }
  std::vector<int> dims(n_layers + 1);
  {
    std::istringstream ss(next_line());
    std::string key;
    ss >> key;
    require(key == "dims", ErrorCode::kIo, "bad dims line in " + path);
    for (auto& d : dims) {
      require(static_cast<bool>(ss >> d) && d > 0, ErrorCode::kIo,
              "bad dims line in " + path);
    }
  }
  std::vector<double> omegas(n_layers);
  {
    std::istringstream ss(next_line());
    std::string key;
    ss >> key;
    require(key == "omega", ErrorCode::kIo, "bad omega line in " + path);
    for (auto& o : omegas) ss >> o;
  }
  std::vector<Act> acts(n_layers);
  {
    std::istringstream ss(next_line());
    std::string key, tag;
    ss >> key;
    require(key == "act", ErrorCode::kIo, "bad act line in " + path);
    for (auto& a : acts) {
      ss >> tag;
      a = act_from_name(tag);
    }
  }
  std::vector<int> residual(n_layers);
  {
    std::istringstream ss(next_line());
    std::string key;
    ss >> key;
    require(key == "residual", ErrorCode::kIo, "bad residual line in " + path);
    for (auto& r : residual) ss >> r;
  }
  AdamConfig cfg;
  {
    std::istringstream ss(next_line());
    std::string key;
    ss >> key >> cfg.lr >> cfg.beta1 >> cfg.beta2 >> cfg.eps;
    require(key == "adam", ErrorCode::kIo, "bad adam line in " + path);
  }
  long step = 0;
  {
    std::istringstream ss(next_line());
    std::string key;
    ss >> key >> step;
    require(key == "step", ErrorCode::kIo, "bad step line in " + path);
  }
  require(next_line() == "data", ErrorCode::kIo, "missing data marker in " + path);

  Checkpoint<T> ck;
  for (int l = 0; l < n_layers; ++l) {
    LayerParams<T> lp;
    lp.w.resize(dims[l + 1], dims[l]);
    lp.b.assign(dims[l + 1], T(0));
    lp.omega = T(omegas[l]);
    lp.act = acts[l];
    lp.residual = residual[l] != 0;
    ck.params.layers.push_back(std::move(lp));
  }
  ck.adam = make_adam(ck.params, cfg);
  ck.adam.step = step;

  auto read_block = [&](Mat<T>& w, std::vector<T>& b) {
    std::vector<double> buf(w.size() + b.size());
    f.read(reinterpret_cast<char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * sizeof(double)));
    require(f.gcount() ==
                static_cast<std::streamsize>(buf.size() * sizeof(double)),
            ErrorCode::kIo, "truncated checkpoint data: " + path);
    for (size_t i = 0; i < w.size(); ++i) w.d[i] = T(buf[i]);
    for (size_t i = 0; i < b.size(); ++i) b[i] = T(buf[w.size() + i]);
  };
  for (auto& l : ck.params.layers) read_block(l.w, l.b);
  for (int l = 0; l < n_layers; ++l) read_block(ck.adam.mw[l], ck.adam.mb[l]);
  for (int l = 0; l < n_layers; ++l) read_block(ck.adam.vw[l], ck.adam.vb[l]);
  ck.params.revision = mix_seed(0xc4c4ull, static_cast<std::uint64_t>(step));
  ck.params.validate();
  return ck;
}

}  // namespace cpt4d::nn
