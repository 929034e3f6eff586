// Copyright 2026 The cpt4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// From-scratch sinusoidal MLP: initialization, forward pass, reverse-mode
// gradients, forward-mode input Jacobians, and reverse-mode differentiation
// through those Jacobians (used by the volume-preservation penalty).
//
// Layer l computes  h_l = act(u_l) [+ h_{l-1} when residual]  with
// u_l = omega_l * (W_l h_{l-1} + b_l).

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cpt4d/common.hpp"
#include "cpt4d/kernels.hpp"
#include "cpt4d/mat.hpp"
#include "cpt4d/rng.hpp"
#include "cpt4d/vecmath.hpp"

namespace cpt4d::nn {

enum class Act { kSine, kLinear, kSigmoid, kTanhshrink };

inline const char* act_name(Act a) {
  switch (a) {
    case Act::kSine: return "sine";
    case Act::kLinear: return "linear";
    case Act::kSigmoid: return "sigmoid";
    case Act::kTanhshrink: return "tanhshrink";
  }
  return "?";
}

inline Act act_from_name(const std::string& s) {
  if (s == "sine") return Act::kSine;
  if (s == "linear") return Act::kLinear;
  if (s == "sigmoid") return Act::kSigmoid;
  if (s == "tanhshrink") return Act::kTanhshrink;
  fail(ErrorCode::kIo, "unknown activation tag: " + s);
}

template <class T>
inline T act_value(Act a, T u) {
  switch (a) {
    case Act::kSine: return std::sin(u);
    case Act::kLinear: return u;
    case Act::kSigmoid: return T(1) / (T(1) + std::exp(-u));
    case Act::kTanhshrink: return u - std::tanh(u);
  }
  return u;
}

template <class T>
inline T act_deriv(Act a, T u) {
  switch (a) {
    case Act::kSine: return std::cos(u);
    case Act::kLinear: return T(1);
    case Act::kSigmoid: {
      T s = T(1) / (T(1) + std::exp(-u));
      return s * (T(1) - s);
    }
    case Act::kTanhshrink: {
      T t = std::tanh(u);
      return t * t;  // 1 - sech^2
    }
  }
  return T(1);
}

template <class T>
inline T act_deriv2(Act a, T u) {
  switch (a) {
    case Act::kSine: return -std::sin(u);
    case Act::kLinear: return T(0);
    case Act::kSigmoid: {
      T s = T(1) / (T(1) + std::exp(-u));
      return s * (T(1) - s) * (T(1) - T(2) * s);
    }
    case Act::kTanhshrink: {
      T t = std::tanh(u);
      return T(2) * t * (T(1) - t * t);
    }
  }
  return T(0);
}

template <class T>
struct LayerParams {
  Mat<T> w;           // out x in
  std::vector<T> b;   // out
  T omega = T(1);
  Act act = Act::kSine;
  bool residual = false;  // h_l += h_{l-1}; requires in == out
};

template <class T>
struct MlpParams {
  std::vector<LayerParams<T>> layers;
  std::uint64_t revision = 0;  // bumped on every parameter update

  int input_dim() const { return layers.empty() ? 0 : layers.front().w.cols; }
  int output_dim() const { return layers.empty() ? 0 : layers.back().w.rows; }
  int depth() const { return static_cast<int>(layers.size()); }

  size_t param_count() const {
    size_t n = 0;
    for (const auto& l : layers) n += l.w.size() + l.b.size();
    return n;
  }

  void validate() const {
    require(!layers.empty(), ErrorCode::kConfig, "mlp: no layers");
    for (size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      require(l.w.rows > 0 && l.w.cols > 0, ErrorCode::kConfig,
              strprintf("mlp: layer %zu has non-positive dims", i));
      require(static_cast<int>(l.b.size()) == l.w.rows, ErrorCode::kShape,
              strprintf("mlp: layer %zu bias size mismatch", i));
      if (i > 0) {
        require(l.w.cols == layers[i - 1].w.rows, ErrorCode::kShape,
                strprintf("mlp: layer %zu input dim %d != previous output %d",
                          i, l.w.cols, layers[i - 1].w.rows));
      }
      if (l.act == Act::kSine) {
        require(l.omega > T(0), ErrorCode::kConfig,
                strprintf("mlp: sine layer %zu needs omega > 0", i));
      }
      if (l.residual) {
        require(l.w.rows == l.w.cols, ErrorCode::kShape,
                strprintf("mlp: residual layer %zu needs square shape", i));
      }
      for (T v : l.w.d) {
        require(std::isfinite(double(v)), ErrorCode::kDomain,
                strprintf("mlp: non-finite weight in layer %zu", i));
      }
      for (T v : l.b) {
        require(std::isfinite(double(v)), ErrorCode::kDomain,
                strprintf("mlp: non-finite bias in layer %zu", i));
      }
    }
  }
};

// First layer U(-1/in, 1/in); later layers U(-sqrt(6/in)/omega, +...);
// biases zero. Hidden activations are sine; the final layer defaults to
// linear and takes `final_act`.
template <class T = double>
MlpParams<T> init_siren(const std::vector<int>& dims, double omega0,
                        double omega_hidden, std::uint64_t seed,
                        Act final_act = Act::kLinear) {
  require(dims.size() >= 2, ErrorCode::kConfig,
          "init_siren: need at least input and output dims");
  for (int d : dims) {
    require(d > 0, ErrorCode::kConfig, "init_siren: non-positive layer dim");
  }
  require(omega0 > 0 && omega_hidden > 0, ErrorCode::kConfig,
          "init_siren: omega must be positive");

  MlpParams<T> p;
  Rng rng(mix_seed(seed, 0x5172454eull));
  const int n_layers = static_cast<int>(dims.size()) - 1;
  for (int l = 0; l < n_layers; ++l) {
    LayerParams<T> lp;
    const int in = dims[l], out = dims[l + 1];
    const bool last = l == n_layers - 1;
    lp.omega = T(last ? 1.0 : (l == 0 ? omega0 : omega_hidden));
    lp.act = last ? final_act : Act::kSine;
    lp.w.resize(out, in);
    lp.b.assign(out, T(0));
    // Final layer keeps the hidden-layer law with its omega of 1.
    const double wb = l == 0 ? 1.0 / in : std::sqrt(6.0 / in) / double(lp.omega);
    for (auto& v : lp.w.d) v = T(rng.next_uniform(-wb, wb));
    p.layers.push_back(std::move(lp));
  }
  p.revision = mix_seed(seed, 0xbeefull);
  p.validate();
  return p;
}

template <class T>
struct Tape {
  Mat<T> input;                // h_0
  std::vector<Mat<T>> pre;     // u_l
  std::vector<Mat<T>> post;    // h_l
  std::vector<Mat<T>> deriv;   // act'(u_l), cached during the forward pass
  std::uint64_t revision = 0;  // revision of the params that produced it

  int batch() const { return input.rows; }
};

template <class T>
void check_tape(const MlpParams<T>& p, const Tape<T>& tape) {
  require(tape.revision == p.revision, ErrorCode::kContract,
          "tape does not match current parameters (stale or foreign tape)");
  require(tape.pre.size() == p.layers.size() &&
              tape.post.size() == p.layers.size() &&
              tape.deriv.size() == p.layers.size(),
          ErrorCode::kContract, "tape/params layer count mismatch");
}

// Forward pass over a batch (rows = points). With `tape`, caches every
// pre-activation and post-activation for a later backward pass.
template <class T>
Mat<T> forward(const MlpParams<T>& p, const Mat<T>& x, Tape<T>* tape = nullptr) {
  require(x.cols == p.input_dim(), ErrorCode::kShape,
          strprintf("forward: input has %d columns, network expects %d",
                    x.cols, p.input_dim()));
  const int n = x.rows;
  Mat<T> h = x;
  if (tape) {
    tape->input = x;
    tape->pre.clear();
    tape->post.clear();
    tape->deriv.clear();
    tape->revision = p.revision;
  }
  for (const auto& l : p.layers) {
    const int out = l.w.rows;
    Mat<T> u(n, out);
    kernels::gemm_abt(h.d.data(), l.w.d.data(), l.b.data(), u.d.data(), 0, n,
                      out, l.w.cols);
    if (l.omega != T(1)) {
      for (auto& v : u.d) v *= l.omega;
    }
    Mat<T> hn(n, out);
    if (!tape) {
      if (l.act == Act::kSine) {
        for (int r = 0; r < n; ++r)
          vecmath::sin_row(u.row(r), hn.row(r), out);
      } else {
        for (size_t i = 0; i < u.d.size(); ++i)
          hn.d[i] = act_value(l.act, u.d[i]);
      }
      if (l.residual) {
        for (size_t i = 0; i < hn.d.size(); ++i) hn.d[i] += h.d[i];
      }
    } else {
      // Value and derivative share the transcendental evaluation.
      Mat<T> dv(n, out);
      switch (l.act) {
        case Act::kSine:
          for (int r = 0; r < n; ++r)
            vecmath::sincos_row(u.row(r), hn.row(r), dv.row(r), out);
          break;
        case Act::kLinear:
          hn.d = u.d;
          dv.fill(T(1));
          break;
        case Act::kSigmoid:
          for (size_t i = 0; i < u.d.size(); ++i) {
            const T s = T(1) / (T(1) + std::exp(-u.d[i]));
            hn.d[i] = s;
            dv.d[i] = s * (T(1) - s);
          }
          break;
        case Act::kTanhshrink:
          for (size_t i = 0; i < u.d.size(); ++i) {
            const T t = std::tanh(u.d[i]);
            hn.d[i] = u.d[i] - t;
            dv.d[i] = t * t;
          }
          break;
      }
      if (l.residual) {
        for (size_t i = 0; i < hn.d.size(); ++i) hn.d[i] += h.d[i];
      }
      tape->pre.push_back(std::move(u));
      tape->post.push_back(hn);
      tape->deriv.push_back(std::move(dv));
    }
    h = std::move(hn);
  }
  return h;
}

template <class T>
struct GradientBundle {
  std::vector<Mat<T>> dw;
  std::vector<std::vector<T>> db;
  Mat<T> dx;

  static GradientBundle zeros_like(const MlpParams<T>& p) {
    GradientBundle g;
    for (const auto& l : p.layers) {
      g.dw.emplace_back(l.w.rows, l.w.cols);
      g.db.emplace_back(l.b.size(), T(0));
    }
    return g;
  }

  void add_scaled(const GradientBundle& o, T alpha) {
    for (size_t l = 0; l < dw.size(); ++l) {
      for (size_t i = 0; i < dw[l].d.size(); ++i)
        dw[l].d[i] += alpha * o.dw[l].d[i];
      for (size_t i = 0; i < db[l].size(); ++i) db[l][i] += alpha * o.db[l][i];
    }
  }

  void scale(T alpha) {
    for (auto& m : dw)
      for (auto& v : m.d) v *= alpha;
    for (auto& b : db)
      for (auto& v : b) v *= alpha;
  }
};

// Reverse-mode gradients of sum(L) where upstream = dL/d(output), one row
// per point. Accumulates parameter gradients into `g`; returns dL/dx rows
// via g.dx when `want_dx`.
template <class T>
void backward_accum(const MlpParams<T>& p, const Tape<T>& tape,
                    const Mat<T>& upstream, GradientBundle<T>& g,
                    bool want_dx = true) {
  check_tape(p, tape);
  require(upstream.rows == tape.batch() && upstream.cols == p.output_dim(),
          ErrorCode::kShape, "backward: upstream shape mismatch");
  const int n = tape.batch();
  Mat<T> hbar = upstream;
  for (int l = p.depth() - 1; l >= 0; --l) {
    const auto& lp = p.layers[l];
    const Mat<T>& dv = tape.deriv[l];
    const Mat<T>& hprev = l == 0 ? tape.input : tape.post[l - 1];
    const int out = lp.w.rows, in = lp.w.cols;
    // gz = omega * hbar ⊙ act'(u)
    Mat<T> gz(n, out);
    for (size_t i = 0; i < gz.d.size(); ++i)
      gz.d[i] = lp.omega * hbar.d[i] * dv.d[i];
    kernels::gemm_atb_accum(gz.d.data(), hprev.d.data(), g.dw[l].d.data(), 0,
                            out, out, in, n);
    for (int o = 0; o < out; ++o) {
      T s = 0;
      for (int r = 0; r < n; ++r) s += gz.at(r, o);
      g.db[l][o] += s;
    }
    if (l > 0 || want_dx) {
      Mat<T> prev_bar(n, in);
      kernels::gemm_ab<T, false>(gz.d.data(), lp.w.d.data(), prev_bar.d.data(),
                                 0, n, in, out);
      if (lp.residual) {
        for (size_t i = 0; i < prev_bar.d.size(); ++i)
          prev_bar.d[i] += hbar.d[i];
      }
      hbar = std::move(prev_bar);
    }
  }
  if (want_dx) g.dx = std::move(hbar);
}

template <class T>
GradientBundle<T> backward(const MlpParams<T>& p, const Tape<T>& tape,
                           const Mat<T>& upstream) {
  auto g = GradientBundle<T>::zeros_like(p);
  backward_accum(p, tape, upstream, g, true);
  return g;
}

// Tangent stack for forward-mode Jacobians w.r.t. the first `ncols` input
// dimensions. tan[l][c] holds T_l for basis column c; tpre[l][c] holds the
// pre-activation tangent P_l = omega * W_l T_{l-1}.
template <class T>
struct TangentTape {
  int ncols = 0;
  std::vector<std::vector<Mat<T>>> tan;
  std::vector<std::vector<Mat<T>>> tpre;
};

// Propagates input-basis tangents through the network. Returns the batch
// Jacobian as an n x (out*ncols) matrix, row p holding d(out_o)/d(x_c) in
// o-major order. Keeps intermediate tangents in `keep` when provided.
template <class T>
Mat<T> jacobian_forward(const MlpParams<T>& p, const Tape<T>& tape, int ncols,
                        TangentTape<T>* keep = nullptr) {
  check_tape(p, tape);
  require(ncols >= 1 && ncols <= p.input_dim(), ErrorCode::kShape,
          "jacobian_forward: tangent column count out of range");
  const int n = tape.batch();
  std::vector<Mat<T>> t(ncols);
  // T_0 columns are constant basis vectors.
  for (int c = 0; c < ncols; ++c) {
    t[c].resize(n, p.input_dim());
    for (int r = 0; r < n; ++r) t[c].at(r, c) = T(1);
  }
  if (keep) {
    keep->ncols = ncols;
    keep->tan.assign(p.depth() + 1, {});
    keep->tpre.assign(p.depth() + 1, {});
    keep->tan[0] = t;
  }
  for (int l = 0; l < p.depth(); ++l) {
    const auto& lp = p.layers[l];
    const Mat<T>& dv = tape.deriv[l];
    const int out = lp.w.rows, in = lp.w.cols;
    std::vector<Mat<T>> tp(ncols), tn(ncols);
    for (int c = 0; c < ncols; ++c) {
      tp[c].resize(n, out);
      kernels::gemm_abt<T>(t[c].d.data(), lp.w.d.data(), nullptr,
                           tp[c].d.data(), 0, n, out, in);
      if (lp.omega != T(1)) {
        for (auto& v : tp[c].d) v *= lp.omega;
      }
      tn[c].resize(n, out);
      for (size_t i = 0; i < tn[c].d.size(); ++i)
        tn[c].d[i] = dv.d[i] * tp[c].d[i];
      if (lp.residual) {
        for (size_t i = 0; i < tn[c].d.size(); ++i) tn[c].d[i] += t[c].d[i];
      }
    }
    if (keep) {
      keep->tpre[l + 1] = tp;
      keep->tan[l + 1] = tn;
    }
    t = std::move(tn);
  }
  const int out = p.output_dim();
  Mat<T> jac(n, out * ncols);
  for (int r = 0; r < n; ++r) {
    for (int o = 0; o < out; ++o)
      for (int c = 0; c < ncols; ++c) jac.at(r, o * ncols + c) = t[c].at(r, o);
  }
  return jac;
}

// Convenience: forward + tangent propagation without keeping tapes.
template <class T>
Mat<T> input_jacobian(const MlpParams<T>& p, const Mat<T>& x, int ncols = -1) {
  Tape<T> tape;
  forward(p, x, &tape);
  return jacobian_forward(p, tape, ncols < 0 ? p.input_dim() : ncols);
}

// Reverse pass through jacobian_forward: given dL/dJ (same layout as the
// jacobian_forward result), accumulates dL/d(params) into `g`. Requires the
// TangentTape captured during the forward tangent propagation.
template <class T>
void jacobian_backward(const MlpParams<T>& p, const Tape<T>& tape,
                       const TangentTape<T>& tt, const Mat<T>& djac,
                       GradientBundle<T>& g) {
  check_tape(p, tape);
  const int n = tape.batch();
  const int out_dim = p.output_dim();
  const int C = tt.ncols;
  require(djac.rows == n && djac.cols == out_dim * C, ErrorCode::kShape,
          "jacobian_backward: dJ shape mismatch");
  require(static_cast<int>(tt.tan.size()) == p.depth() + 1,
          ErrorCode::kContract, "jacobian_backward: tangent tape mismatch");

  // Unpack dL/dT_L per tangent column.
  std::vector<Mat<T>> tbar(C);
  for (int c = 0; c < C; ++c) {
    tbar[c].resize(n, out_dim);
    for (int r = 0; r < n; ++r)
      for (int o = 0; o < out_dim; ++o)
        tbar[c].at(r, o) = djac.at(r, o * C + c);
  }
  Mat<T> hbar(n, out_dim);  // dL/dh_l, zero at the top

  std::vector<T> d2;
  for (int l = p.depth() - 1; l >= 0; --l) {
    const auto& lp = p.layers[l];
    const Mat<T>& u = tape.pre[l];
    const Mat<T>& d1 = tape.deriv[l];
    const Mat<T>& hprev = l == 0 ? tape.input : tape.post[l - 1];
    const int out = lp.w.rows, in = lp.w.cols;
    d2.resize(u.d.size());
    if (lp.act == Act::kSine && !lp.residual) {
      const Mat<T>& post = tape.post[l];  // sin(u) is the cached value
      for (size_t i = 0; i < u.d.size(); ++i) d2[i] = -post.d[i];
    } else {
      for (size_t i = 0; i < u.d.size(); ++i)
        d2[i] = act_deriv2(lp.act, u.d[i]);
    }

    // ubar collects dL/du_l from both chains.
    Mat<T> ubar(n, out);
    for (size_t i = 0; i < ubar.d.size(); ++i)
      ubar.d[i] = hbar.d[i] * d1.d[i];

    std::vector<Mat<T>> pbar(C);
    for (int c = 0; c < C; ++c) {
      const Mat<T>& tp = tt.tpre[l + 1][c];
      // dL/d(act'(u)) contribution: tbar ⊙ P
      for (size_t i = 0; i < ubar.d.size(); ++i)
        ubar.d[i] += tbar[c].d[i] * tp.d[i] * d2[i];
      // pbar = omega * tbar ⊙ act'(u)
      pbar[c].resize(n, out);
      for (size_t i = 0; i < pbar[c].d.size(); ++i)
        pbar[c].d[i] = lp.omega * tbar[c].d[i] * d1.d[i];
      // dW += pbar^T · T_{l-1}
      kernels::gemm_atb_accum(pbar[c].d.data(), tt.tan[l][c].d.data(),
                              g.dw[l].d.data(), 0, out, out, in, n);
    }

    // a-chain parameter gradients: gz = omega * ubar
    Mat<T> gz(n, out);
    for (size_t i = 0; i < gz.d.size(); ++i) gz.d[i] = lp.omega * ubar.d[i];
    kernels::gemm_atb_accum(gz.d.data(), hprev.d.data(), g.dw[l].d.data(), 0,
                            out, out, in, n);
    for (int o = 0; o < out; ++o) {
      T s = 0;
      for (int r = 0; r < n; ++r) s += gz.at(r, o);
      g.db[l][o] += s;
    }

    if (l > 0) {
      // Propagate both chains to the previous layer.
      std::vector<Mat<T>> tprev(C);
      for (int c = 0; c < C; ++c) {
        tprev[c].resize(n, in);
        kernels::gemm_ab<T, false>(pbar[c].d.data(), lp.w.d.data(),
                                   tprev[c].d.data(), 0, n, in, out);
        if (lp.residual) {
          for (size_t i = 0; i < tprev[c].d.size(); ++i)
            tprev[c].d[i] += tbar[c].d[i];
        }
      }
      tbar = std::move(tprev);
      Mat<T> hprev_bar(n, in);
      kernels::gemm_ab<T, false>(gz.d.data(), lp.w.d.data(),
                                 hprev_bar.d.data(), 0, n, in, out);
      if (lp.residual) {
        for (size_t i = 0; i < hprev_bar.d.size(); ++i)
          hprev_bar.d[i] += hbar.d[i];
      }
      hbar = std::move(hprev_bar);
    }
  }
}

struct AdamConfig {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class T>
struct AdamState {
  AdamConfig cfg;
  long step = 0;
  std::vector<Mat<T>> mw, vw;
  std::vector<std::vector<T>> mb, vb;
};

template <class T>
AdamState<T> make_adam(const MlpParams<T>& p, AdamConfig cfg = {}) {
  AdamState<T> s;
  s.cfg = cfg;
  for (const auto& l : p.layers) {
    s.mw.emplace_back(l.w.rows, l.w.cols);
    s.vw.emplace_back(l.w.rows, l.w.cols);
    s.mb.emplace_back(l.b.size(), T(0));
    s.vb.emplace_back(l.b.size(), T(0));
  }
  return s;
}

// Bias-corrected Adam update in place. Throws on non-finite gradients,
// naming the offending layer.
template <class T>
void adam_step(MlpParams<T>& p, AdamState<T>& s, const GradientBundle<T>& g) {
  require(g.dw.size() == p.layers.size(), ErrorCode::kShape,
          "adam_step: gradient layer count mismatch");
  for (size_t l = 0; l < p.layers.size(); ++l) {
    for (T v : g.dw[l].d)
      require(std::isfinite(double(v)), ErrorCode::kDivergence,
              strprintf("adam_step: non-finite weight gradient in layer %zu", l));
    for (T v : g.db[l])
      require(std::isfinite(double(v)), ErrorCode::kDivergence,
              strprintf("adam_step: non-finite bias gradient in layer %zu", l));
  }
  s.step += 1;
  const T b1 = T(s.cfg.beta1), b2 = T(s.cfg.beta2);
  const T corr1 = T(1) - std::pow(b1, T(s.step));
  const T corr2 = T(1) - std::pow(b2, T(s.step));
  const T lr = T(s.cfg.lr), eps = T(s.cfg.eps);
  for (size_t l = 0; l < p.layers.size(); ++l) {
    auto update = [&](T* w, const T* dv, T* m, T* v, size_t count) {
      for (size_t i = 0; i < count; ++i) {
        m[i] = b1 * m[i] + (T(1) - b1) * dv[i];
        v[i] = b2 * v[i] + (T(1) - b2) * dv[i] * dv[i];
        T mhat = m[i] / corr1;
        T vhat = v[i] / corr2;
        w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    };
    update(p.layers[l].w.d.data(), g.dw[l].d.data(), s.mw[l].d.data(),
           s.vw[l].d.data(), p.layers[l].w.size());
    update(p.layers[l].b.data(), g.db[l].data(), s.mb[l].data(),
           s.vb[l].data(), p.layers[l].b.size());
  }
  p.revision = mix_seed(p.revision, 0xada3ull, s.step);
}

}  // namespace cpt4d::nn
