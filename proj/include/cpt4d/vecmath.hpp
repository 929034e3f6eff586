// Copyright 2026 The cpt4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Row-invariant vectorized sine/cosine. Lanes are assigned within each row
// (never across rows), so an element's value is independent of how rows are
// batched; scalar tails always cover the same trailing columns. Vector
// results are clamped to [-1, 1] because the vector routines may overshoot
// by a few ulp while the sine-layer contract promises bounded outputs.

#include <cmath>

#if defined(__AVX512F__) && defined(__GLIBC__)
#include <immintrin.h>
extern "C" {
__m512d _ZGVeN8v_sin(__m512d);
__m512d _ZGVeN8v_cos(__m512d);
__m512 _ZGVeN16v_sinf(__m512);
__m512 _ZGVeN16v_cosf(__m512);
}
#define CPT4D_VEC_SINCOS 1
#endif

namespace cpt4d::vecmath {

inline void sin_row(const double* u, double* s, int n) {
  int i = 0;
#ifdef CPT4D_VEC_SINCOS
  const __m512d lo = _mm512_set1_pd(-1.0), hi = _mm512_set1_pd(1.0);
  for (; i + 8 <= n; i += 8) {
    __m512d v = _ZGVeN8v_sin(_mm512_loadu_pd(u + i));
    _mm512_storeu_pd(s + i, _mm512_max_pd(lo, _mm512_min_pd(hi, v)));
  }
#endif
  for (; i < n; ++i) s[i] = std::sin(u[i]);
}

inline void sincos_row(const double* u, double* s, double* c, int n) {
  int i = 0;
#ifdef CPT4D_VEC_SINCOS
  const __m512d lo = _mm512_set1_pd(-1.0), hi = _mm512_set1_pd(1.0);
  for (; i + 8 <= n; i += 8) {
    const __m512d x = _mm512_loadu_pd(u + i);
    __m512d vs = _ZGVeN8v_sin(x);
    __m512d vc = _ZGVeN8v_cos(x);
    _mm512_storeu_pd(s + i, _mm512_max_pd(lo, _mm512_min_pd(hi, vs)));
    _mm512_storeu_pd(c + i, _mm512_max_pd(lo, _mm512_min_pd(hi, vc)));
  }
#endif
  for (; i < n; ++i) {
    s[i] = std::sin(u[i]);
    c[i] = std::cos(u[i]);
  }
}

inline void sin_row(const float* u, float* s, int n) {
  int i = 0;
#ifdef CPT4D_VEC_SINCOS
  const __m512 lo = _mm512_set1_ps(-1.0f), hi = _mm512_set1_ps(1.0f);
  for (; i + 16 <= n; i += 16) {
    __m512 v = _ZGVeN16v_sinf(_mm512_loadu_ps(u + i));
    _mm512_storeu_ps(s + i, _mm512_max_ps(lo, _mm512_min_ps(hi, v)));
  }
#endif
  for (; i < n; ++i) s[i] = std::sin(u[i]);
}

inline void sincos_row(const float* u, float* s, float* c, int n) {
  int i = 0;
#ifdef CPT4D_VEC_SINCOS
  const __m512 lo = _mm512_set1_ps(-1.0f), hi = _mm512_set1_ps(1.0f);
  for (; i + 16 <= n; i += 16) {
    const __m512 x = _mm512_loadu_ps(u + i);
    __m512 vs = _ZGVeN16v_sinf(x);
    __m512 vc = _ZGVeN16v_cosf(x);
    _mm512_storeu_ps(s + i, _mm512_max_ps(lo, _mm512_min_ps(hi, vs)));
    _mm512_storeu_ps(c + i, _mm512_max_ps(lo, _mm512_min_ps(hi, vc)));
  }
#endif
  for (; i < n; ++i) {
    s[i] = std::sin(u[i]);
    c[i] = std::cos(u[i]);
  }
}

}  // namespace cpt4d::vecmath
