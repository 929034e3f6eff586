// Copyright 2026 The cpt4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "cpt4d/common.hpp"

namespace cpt4d {

// Dense row-major matrix. Deliberately minimal: storage plus indexing;
// all numerics live in kernels.hpp.
template <class T>
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<T> d;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), d(static_cast<size_t>(r) * c, T(0)) {}

  T* row(int r) { return d.data() + static_cast<size_t>(r) * cols; }
  const T* row(int r) const { return d.data() + static_cast<size_t>(r) * cols; }
  T& at(int r, int c) { return d[static_cast<size_t>(r) * cols + c]; }
  const T& at(int r, int c) const { return d[static_cast<size_t>(r) * cols + c]; }
  size_t size() const { return d.size(); }
  void fill(T v) { std::fill(d.begin(), d.end(), v); }
  void resize(int r, int c) {
    rows = r;
    cols = c;
    d.assign(static_cast<size_t>(r) * c, T(0));
  }
};

template <class T>
bool same_shape(const Mat<T>& a, const Mat<T>& b) {
  return a.rows == b.rows && a.cols == b.cols;
}

}  // namespace cpt4d
