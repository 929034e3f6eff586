// Copyright 2026 The cpt4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Training objective: L1 photometric term plus a Jacobian-determinant
// volume-preservation penalty on the motion field,
//   total = photo + lambda * jacdet,
//   jacdet = mean |1 - det(I + d(phi)/dx)|.

#include <cmath>
#include <vector>

#include "cpt4d/networks.hpp"
#include "cpt4d/nn.hpp"

namespace cpt4d {

struct LossReport {
  double l_photo = 0;
  double l_jacdet = 0;
  double l_total = 0;
  double lambda = 0;
  long n_points = 0;
};

template <class T>
struct PairGradients {
  nn::GradientBundle<T> motion;
  nn::GradientBundle<T> anatomy;

  template <class M, class A>
  static PairGradients zeros_like(const M& m, const A& a) {
    PairGradients g;
    g.motion = nn::GradientBundle<T>::zeros_like(m.core);
    g.anatomy = nn::GradientBundle<T>::zeros_like(a.core);
    return g;
  }

  void add_scaled(const PairGradients& o, T alpha) {
    motion.add_scaled(o.motion, alpha);
    anatomy.add_scaled(o.anatomy, alpha);
  }
};

template <class T>
T photometric_l1(const std::vector<T>& pred, const std::vector<T>& gt) {
  require(pred.size() == gt.size(), ErrorCode::kShape,
          "photometric_l1: length mismatch");
  require(!pred.empty(), ErrorCode::kDomain,
          "photometric_l1: mean of an empty batch is undefined");
  T s = 0;
  for (size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - gt[i]);
  return s / T(pred.size());
}

namespace detail {

template <class T>
inline T det3(const T* f) {
  return f[0] * (f[4] * f[8] - f[5] * f[7]) -
         f[1] * (f[3] * f[8] - f[5] * f[6]) +
         f[2] * (f[3] * f[7] - f[4] * f[6]);
}

// d(det)/dF, the cofactor matrix, row-major.
template <class T>
inline void cofactor3(const T* f, T* c) {
  c[0] = f[4] * f[8] - f[5] * f[7];
  c[1] = -(f[3] * f[8] - f[5] * f[6]);
  c[2] = f[3] * f[7] - f[4] * f[6];
  c[3] = -(f[1] * f[8] - f[2] * f[7]);
  c[4] = f[0] * f[8] - f[2] * f[6];
  c[5] = -(f[0] * f[7] - f[1] * f[6]);
  c[6] = f[1] * f[5] - f[2] * f[4];
  c[7] = -(f[0] * f[5] - f[2] * f[3]);
  c[8] = f[0] * f[4] - f[1] * f[3];
}

template <class T>
inline T sgn(T v) {
  return T(v > T(0)) - T(v < T(0));
}

inline constexpr int kLossChunk = 2048;

}  // namespace detail

// Mean |1 - det(I + J)| over the batch, where J is the spatial 3x3 block of
// the displacement Jacobian (the state column is excluded).
template <class T>
double jacdet_penalty(const MotionNetwork<T>& m, const Mat<T>& coords, T state,
                      StatePolicy policy = StatePolicy::kStrict) {
  require(coords.cols == 3, ErrorCode::kShape, "jacdet_penalty: coords are 3d");
  const int n = coords.rows;
  require(n > 0, ErrorCode::kDomain, "jacdet_penalty: empty batch");
  T s = apply_state_policy(state, policy, nullptr);
  double acc = 0;
  for (int lo = 0; lo < n; lo += detail::kLossChunk) {
    const int hi = std::min(n, lo + detail::kLossChunk);
    Mat<T> chunk(hi - lo, 3);
    for (int r = lo; r < hi; ++r)
      for (int c = 0; c < 3; ++c) chunk.at(r - lo, c) = coords.at(r, c);
    nn::Tape<T> tape;
    nn::forward(m.core, augment_state(chunk, s), &tape);
    Mat<T> jac = nn::jacobian_forward(m.core, tape, 3);
    for (int r = 0; r < jac.rows; ++r) {
      T f[9];
      for (int i = 0; i < 9; ++i) f[i] = jac.at(r, i);
      f[0] += T(1);
      f[4] += T(1);
      f[8] += T(1);
      acc += std::abs(1.0 - double(detail::det3(f)));
    }
  }
  return acc / n;
}

// Full objective over one coordinate batch at a single state. When `grads`
// is given, accumulates d(l_total)/d(params) for both networks into it.
// The jacdet term (and its cost) is skipped entirely when lambda == 0.
template <class T>
LossReport total_loss(const MotionNetwork<T>& m, const AnatomyNetwork<T>& a,
                      const Mat<T>& coords, T state, const std::vector<T>& gt,
                      double lambda, PairGradients<T>* grads = nullptr,
                      StatePolicy policy = StatePolicy::kStrict) {
  require(coords.cols == 3, ErrorCode::kShape, "total_loss: coords are 3d");
  const int n = coords.rows;
  require(n > 0, ErrorCode::kDomain, "total_loss: empty batch");
  require(static_cast<int>(gt.size()) == n, ErrorCode::kShape,
          "total_loss: ground-truth length mismatch");
  T s = apply_state_policy(state, policy, nullptr);

  double photo_sum = 0, jac_sum = 0;
  const T inv_n = T(1) / T(n);
  for (int lo = 0; lo < n; lo += detail::kLossChunk) {
    const int hi = std::min(n, lo + detail::kLossChunk);
    const int cn = hi - lo;
    Mat<T> chunk(cn, 3);
    for (int r = 0; r < cn; ++r)
      for (int c = 0; c < 3; ++c) chunk.at(r, c) = coords.at(lo + r, c);

    nn::Tape<T> mtape;
    Mat<T> phi = nn::forward(m.core, augment_state(chunk, s), &mtape);
    Mat<T> xref = warp(chunk, phi);
    nn::Tape<T> atape;
    Mat<T> pred = nn::forward(a.core, xref, &atape);

    Mat<T> up(cn, 1);
    for (int r = 0; r < cn; ++r) {
      const T diff = pred.at(r, 0) - gt[lo + r];
      photo_sum += std::abs(double(diff));
      up.at(r, 0) = detail::sgn(diff) * inv_n;
    }
    if (grads) {
      nn::backward_accum(a.core, atape, up, grads->anatomy, true);
      // x_ref = x + phi, so d/d(phi) equals d/d(x_ref).
      nn::backward_accum(m.core, mtape, grads->anatomy.dx, grads->motion,
                         false);
    }

    if (lambda != 0) {
      nn::TangentTape<T> tt;
      Mat<T> jac = nn::jacobian_forward(m.core, mtape, 3,
                                        grads ? &tt : nullptr);
      Mat<T> dj;
      if (grads) dj.resize(cn, 9);
      for (int r = 0; r < cn; ++r) {
        T f[9];
        for (int i = 0; i < 9; ++i) f[i] = jac.at(r, i);
        f[0] += T(1);
        f[4] += T(1);
        f[8] += T(1);
        const T one_minus_det = T(1) - detail::det3(f);
        jac_sum += std::abs(double(one_minus_det));
        if (grads) {
          T cof[9];
          detail::cofactor3(f, cof);
          const T coeff = -detail::sgn(one_minus_det) * T(lambda) * inv_n;
          for (int i = 0; i < 9; ++i) dj.at(r, i) = coeff * cof[i];
        }
      }
      if (grads) nn::jacobian_backward(m.core, mtape, tt, dj, grads->motion);
    }
  }

  LossReport rep;
  rep.n_points = n;
  rep.lambda = lambda;
  rep.l_photo = photo_sum / n;
  rep.l_jacdet = lambda != 0 ? jac_sum / n : 0.0;
  rep.l_total = rep.l_photo + rep.lambda * rep.l_jacdet;
  return rep;
}

}  // namespace cpt4d
