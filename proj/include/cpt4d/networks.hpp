// Copyright 2026 The cpt4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// The two coordinate networks and their composition.
//
// MotionNetwork ("DeformShrink"): (x, y, z, state) -> displacement, a SIREN
// backbone whose output passes through Tanhshrink(z) = z - tanh(z), which
// suppresses small spurious motion while leaving large motion nearly linear.
//
// AnatomyNetwork ("SirenRes"): reference coordinate -> intensity, a SIREN
// with a residual skip at the last hidden layer and a sigmoid output that
// pins intensities to (0, 1).

#include <vector>

#include "cpt4d/nn.hpp"

namespace cpt4d {

enum class StatePolicy {
  kStrict,       // out-of-range state is a domain error (training)
  kClampWarn,    // clamp into [-1, 1] and count it (reconstruction)
  kPassthrough,  // evaluate as-is and count it (held-out evaluation)
};

template <class T>
struct MotionNetwork {
  nn::MlpParams<T> core;  // input (x,y,z,s), output 3, final act tanhshrink
};

template <class T>
struct AnatomyNetwork {
  nn::MlpParams<T> core;  // input (x,y,z), output 1, final act sigmoid
};

// depth = number of weight layers; hidden widths are uniform.
template <class T = double>
MotionNetwork<T> make_motion_network(int depth, int width, double omega0,
                                     double omega_hidden, std::uint64_t seed) {
  require(depth >= 1 && width >= 1, ErrorCode::kConfig,
          "motion network: depth and width must be positive");
  std::vector<int> dims;
  dims.push_back(4);
  for (int i = 0; i < depth - 1; ++i) dims.push_back(width);
  dims.push_back(3);
  MotionNetwork<T> m;
  m.core = nn::init_siren<T>(dims, omega0, omega_hidden,
                             mix_seed(seed, 0x7a4eull), nn::Act::kTanhshrink);
  return m;
}

// Residual skip on the last hidden sine layer (needs two hidden layers of
// equal width, i.e. depth >= 3).
template <class T = double>
AnatomyNetwork<T> make_anatomy_network(int depth, int width, double omega0,
                                       double omega_hidden,
                                       std::uint64_t seed) {
  require(depth >= 1 && width >= 1, ErrorCode::kConfig,
          "anatomy network: depth and width must be positive");
  std::vector<int> dims;
  dims.push_back(3);
  for (int i = 0; i < depth - 1; ++i) dims.push_back(width);
  dims.push_back(1);
  AnatomyNetwork<T> a;
  a.core = nn::init_siren<T>(dims, omega0, omega_hidden,
                             mix_seed(seed, 0x5a4eull), nn::Act::kSigmoid);
  if (depth >= 3) a.core.layers[depth - 2].residual = true;
  return a;
}

// Appends the scalar state as a fourth input column.
template <class T>
Mat<T> augment_state(const Mat<T>& coords, T state) {
  require(coords.cols == 3, ErrorCode::kShape,
          "augment_state: expected 3 coordinate columns");
  Mat<T> out(coords.rows, 4);
  for (int r = 0; r < coords.rows; ++r) {
    const T* src = coords.row(r);
    T* dst = out.row(r);
    dst[0] = src[0];
    dst[1] = src[1];
    dst[2] = src[2];
    dst[3] = state;
  }
  return out;
}

// Validates/normalizes the state per policy. Returns the state actually fed
// to the network and increments `flagged` when it was out of range.
template <class T>
T apply_state_policy(T state, StatePolicy policy, long* flagged) {
  if (state >= T(-1) && state <= T(1)) return state;
  switch (policy) {
    case StatePolicy::kStrict:
      fail(ErrorCode::kDomain,
           strprintf("respiratory state %.6g outside [-1, 1]", double(state)));
    case StatePolicy::kClampWarn:
      if (flagged) ++*flagged;
      return state < T(-1) ? T(-1) : T(1);
    case StatePolicy::kPassthrough:
      if (flagged) ++*flagged;
      return state;
  }
  return state;
}

// Displacement field at one respiratory state, in normalized coordinate
// units. With `tape`, caches activations for the backward pass.
template <class T>
Mat<T> displacement(const MotionNetwork<T>& m, const Mat<T>& coords, T state,
                    StatePolicy policy = StatePolicy::kStrict,
                    long* flagged = nullptr, nn::Tape<T>* tape = nullptr) {
  T s = apply_state_policy(state, policy, flagged);
  return nn::forward(m.core, augment_state(coords, s), tape);
}

template <class T>
Mat<T> warp(const Mat<T>& coords, const Mat<T>& phi) {
  require(same_shape(coords, phi), ErrorCode::kShape,
          "warp: coordinate and displacement shapes differ");
  Mat<T> out(coords.rows, coords.cols);
  for (size_t i = 0; i < out.d.size(); ++i) out.d[i] = coords.d[i] + phi.d[i];
  return out;
}

template <class T>
std::vector<T> intensity(const AnatomyNetwork<T>& a, const Mat<T>& ref_coords,
                         nn::Tape<T>* tape = nullptr) {
  Mat<T> out = nn::forward(a.core, ref_coords, tape);
  return std::move(out.d);
}

// I(x, s) = anatomy(x + motion(x, s)).
template <class T>
std::vector<T> predict_intensity(const MotionNetwork<T>& m,
                                 const AnatomyNetwork<T>& a,
                                 const Mat<T>& coords, T state,
                                 StatePolicy policy = StatePolicy::kStrict,
                                 long* flagged = nullptr) {
  Mat<T> phi = displacement(m, coords, state, policy, flagged);
  return intensity(a, warp(coords, phi));
}

}  // namespace cpt4d
