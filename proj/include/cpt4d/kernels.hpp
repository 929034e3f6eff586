// Copyright 2026 The cpt4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Dense kernels with a fixed per-element accumulation order. Every output
// element is reduced in the same lane pattern no matter how the batch is
// chunked or how many threads run, so results are bit-reproducible.

#include <cstddef>

namespace cpt4d::kernels {

template <class T>
inline constexpr int kDotLanes = sizeof(T) == 4 ? 16 : 8;

template <class T>
inline T dot_fixed(const T* __restrict__ a, const T* __restrict__ b, int k) {
  constexpr int L = kDotLanes<T>;
  T s[L] = {};
  int i = 0;
  for (; i + L <= k; i += L) {
    for (int l = 0; l < L; ++l) s[l] += a[i + l] * b[i + l];
  }
  T tail = 0;
  for (; i < k; ++i) tail += a[i] * b[i];
  T r = 0;
  for (int l = 0; l < L; ++l) r += s[l];
  return r + tail;
}

// C[m0:m1, :] = A·Bᵀ (+ bias), A: M×K, B: N×K, C: M×N, all row-major.
template <class T>
void gemm_abt(const T* __restrict__ a, const T* __restrict__ b,
              const T* __restrict__ bias, T* __restrict__ c, int m0, int m1,
              int n, int k) {
  for (int m = m0; m < m1; ++m) {
    const T* ar = a + static_cast<size_t>(m) * k;
    T* cr = c + static_cast<size_t>(m) * n;
    int j = 0;
    for (; j + 4 <= n; j += 4) {
      const T* b0 = b + static_cast<size_t>(j) * k;
      const T* b1 = b0 + k;
      const T* b2 = b1 + k;
      const T* b3 = b2 + k;
      cr[j] = dot_fixed(ar, b0, k);
      cr[j + 1] = dot_fixed(ar, b1, k);
      cr[j + 2] = dot_fixed(ar, b2, k);
      cr[j + 3] = dot_fixed(ar, b3, k);
    }
    for (; j < n; ++j) cr[j] = dot_fixed(ar, b + static_cast<size_t>(j) * k, k);
    if (bias) {
      for (int x = 0; x < n; ++x) cr[x] += bias[x];
    }
  }
}

// C[m0:m1, :] (+)= A·B, A: M×K, B: K×N row-major. k ascends per element.
template <class T, bool Accum>
void gemm_ab(const T* __restrict__ a, const T* __restrict__ b,
             T* __restrict__ c, int m0, int m1, int n, int k) {
  for (int m = m0; m < m1; ++m) {
    const T* ar = a + static_cast<size_t>(m) * k;
    T* cr = c + static_cast<size_t>(m) * n;
    if (!Accum) {
      for (int x = 0; x < n; ++x) cr[x] = 0;
    }
    for (int kk = 0; kk < k; ++kk) {
      T av = ar[kk];
      const T* br = b + static_cast<size_t>(kk) * n;
      for (int x = 0; x < n; ++x) cr[x] += av * br[x];
    }
  }
}

// C[m0:m1, :] += AᵀB, A: K×M, B: K×N row-major, C: M×N. k ascends per element.
template <class T>
void gemm_atb_accum(const T* __restrict__ a, const T* __restrict__ b,
                    T* __restrict__ c, int m0, int m1, int am, int n, int k) {
  for (int m = m0; m < m1; ++m) {
    T* cr = c + static_cast<size_t>(m) * n;
    for (int kk = 0; kk < k; ++kk) {
      T av = a[static_cast<size_t>(kk) * am + m];
      const T* br = b + static_cast<size_t>(kk) * n;
      for (int x = 0; x < n; ++x) cr[x] += av * br[x];
    }
  }
}

}  // namespace cpt4d::kernels
