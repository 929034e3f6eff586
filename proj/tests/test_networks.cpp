// Copyright 2026 The cpt4d Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "cpt4d/networks.hpp"
#include "test_support.hpp"

using namespace cpt4d;
using namespace cpt4d::testing;

TEST_CASE("motion network default architecture") {
  auto m = make_motion_network<double>(4, 256, 30, 1, 42);
  REQUIRE(m.core.depth() == 4);
  REQUIRE(m.core.layers[0].w.rows == 256);
  REQUIRE(m.core.layers[0].w.cols == 4);
  REQUIRE(m.core.layers[0].omega == 30.0);
  REQUIRE(m.core.layers[1].omega == 1.0);
  REQUIRE(m.core.layers[3].w.rows == 3);
  REQUIRE(m.core.layers[3].act == nn::Act::kTanhshrink);
}

TEST_CASE("anatomy network default architecture") {
  auto a = make_anatomy_network<double>(5, 512, 30, 1, 42);
  REQUIRE(a.core.depth() == 5);
  REQUIRE(a.core.layers[0].w.cols == 3);
  REQUIRE(a.core.layers[4].w.rows == 1);
  REQUIRE(a.core.layers[4].act == nn::Act::kSigmoid);
  REQUIRE(a.core.layers[3].residual);
  REQUIRE(!a.core.layers[2].residual);
  // Residual needs two equal-width hidden layers.
  auto shallow = make_anatomy_network<double>(2, 64, 30, 1, 1);
  for (const auto& l : shallow.core.layers) REQUIRE(!l.residual);
}

TEST_CASE("tanhshrink output head") {
  // Zeroed final layer: displacement is exactly zero.
  auto m = make_motion_network<double>(3, 16, 30, 1, 3);
  m.core.layers[2].w.fill(0);
  Rng rng(5);
  auto x = random_batch(rng, 10, 3);
  auto phi = displacement(m, x, 0.25);
  for (double v : phi.d) REQUIRE(v == 0.0);

  // Unit pre-activation: 1 - tanh(1).
  nn::MlpParams<double> p;
  nn::LayerParams<double> l;
  l.w.resize(1, 1);
  l.w.at(0, 0) = 1.0;
  l.b.assign(1, 0.0);
  l.omega = 1.0;
  l.act = nn::Act::kTanhshrink;
  p.layers.push_back(l);
  p.revision = 1;
  Mat<double> one(1, 1);
  one.at(0, 0) = 1.0;
  auto y = nn::forward(p, one);
  REQUIRE(y.at(0, 0) == Catch::Approx(1.0 - std::tanh(1.0)).epsilon(1e-12));

  // Cubic suppression of small pre-activations.
  for (double z : {0.1, 0.05, -0.08, 0.013, -0.002}) {
    double out = z - std::tanh(z);
    REQUIRE(std::abs(out) <= std::abs(z * z * z) / 3.0 * 1.01);
  }

  // Odd and magnitude-shrinking everywhere.
  for (double z = -4; z <= 4; z += 0.37) {
    double f = z - std::tanh(z);
    double fneg = -z - std::tanh(-z);
    REQUIRE(f == Catch::Approx(-fneg).margin(1e-15));
    if (z != 0) REQUIRE(std::abs(f) < std::abs(z));
  }
}

TEST_CASE("warp is plain vector addition") {
  Mat<double> x(2, 3), phi(2, 3);
  x.at(0, 0) = 0.1;
  x.at(0, 1) = 0.2;
  x.at(0, 2) = 0.3;
  phi.at(0, 2) = -0.05;
  auto w = warp(x, phi);
  REQUIRE(w.at(0, 0) == 0.1);
  REQUIRE(w.at(0, 1) == 0.2);
  REQUIRE(w.at(0, 2) == 0.25);

  Rng rng(8);
  auto xr = random_batch(rng, 20, 3);
  auto pr = random_batch(rng, 20, 3);
  auto same = warp(xr, pr);
  Mat<double> neg = pr;
  for (auto& v : neg.d) v = -v;
  auto back = warp(same, neg);
  REQUIRE(back.d == xr.d);  // exact additive inverse

  auto zero = Mat<double>(20, 3);
  REQUIRE(warp(xr, zero).d == xr.d);
}

TEST_CASE("anatomy output range and pure skip") {
  auto a = make_anatomy_network<double>(5, 16, 30, 1, 9);
  Rng rng(11);
  auto x = random_batch(rng, 64, 3, -3, 3);
  auto v = intensity(a, x);
  for (double i : v) {
    REQUIRE(i > 0.0);
    REQUIRE(i < 1.0);
  }

  // Zeroed final linear layer: sigmoid(0) = 0.5 everywhere.
  auto a2 = a;
  a2.core.layers[4].w.fill(0);
  for (double i : intensity(a2, x)) REQUIRE(i == 0.5);

  // Zeroing the residual layer's sine branch turns it into the identity.
  auto a3 = a;
  a3.core.layers[3].w.fill(0);
  auto skipped = a3.core;
  skipped.layers.erase(skipped.layers.begin() + 3);
  skipped.revision = a3.core.revision;
  auto y1 = nn::forward(a3.core, x);
  auto y2 = nn::forward(skipped, x);
  REQUIRE(y1.d == y2.d);
}

TEST_CASE("composition equals manual chaining bitwise") {
  auto m = make_motion_network<double>(3, 24, 30, 1, 2);
  auto a = make_anatomy_network<double>(4, 32, 30, 1, 3);
  Rng rng(21);
  auto x = random_batch(rng, 40, 3);
  const double s = -0.3;

  auto direct = predict_intensity(m, a, x, s);
  auto manual = intensity(a, warp(x, displacement(m, x, s)));
  REQUIRE(direct == manual);

  // Motion zeroed: composition reduces to the anatomy at x.
  auto mz = m;
  mz.core.layers[2].w.fill(0);
  mz.core.layers[2].b.assign(3, 0.0);
  REQUIRE(predict_intensity(mz, a, x, s) == intensity(a, x));
}

TEST_CASE("state policies") {
  auto m = make_motion_network<double>(2, 8, 30, 1, 4);
  Rng rng(3);
  auto x = random_batch(rng, 5, 3);
  REQUIRE_THROWS_AS(displacement(m, x, 1.2), Error);
  long flagged = 0;
  auto clamped = displacement(m, x, 1.2, StatePolicy::kClampWarn, &flagged);
  REQUIRE(flagged == 1);
  REQUIRE(clamped.d == displacement(m, x, 1.0).d);
  flagged = 0;
  auto passed = displacement(m, x, 1.2, StatePolicy::kPassthrough, &flagged);
  REQUIRE(flagged == 1);
  REQUIRE(passed.d != clamped.d);
}
