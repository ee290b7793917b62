// Copyright Contributors to the splatkit project
// SPDX-License-Identifier: Apache-2.0
#include "splatkit/error_maps.hpp"

#include "helpers.hpp"

#include <doctest.h>

using namespace splat;

TEST_CASE("identical images produce empty error maps and zero photometric loss") {
  Rng rng(61);
  Image<double> img(8, 8);
  for (auto& p : img.pixels)
    p = Vec3<double>(rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1));
  const auto maps = build_error_maps(img, img, 0.5, 0.2);
  CHECK(maps.raw.maxCoeff() == 0.0);
  CHECK(maps.normalized.maxCoeff() == 0.0);  // degenerate min-max goes to zeros
  CHECK(maps.mask.maxCoeff() == 0);
  CHECK(maps.photometric == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("per-pixel channel-mean absolute error arithmetic") {
  Image<double> r(2, 1), g(2, 1);
  r.at(0, 0) = Vec3<double>(0.5, 0.3, 0.1);
  g.at(0, 0) = Vec3<double>(0.1, 0.3, 0.5);
  const auto maps = build_error_maps(r, g, 0.5, 0.2);
  CHECK(maps.raw(0, 0) == doctest::Approx(0.2667).epsilon(1e-3));
  CHECK(maps.raw(0, 1) == 0.0);
}

TEST_CASE("min-max normalization and strict mask threshold") {
  // evenly spaced raw values normalize to {0, 0.5, 1}; tau 0.5 keeps only
  // the strict winner. Values are picked exactly representable so the
  // middle pixel lands on tau exactly.
  Image<double> r(3, 1), g(3, 1);
  r.at(0, 0) = Vec3<double>(0.25, 0.25, 0.25);
  r.at(1, 0) = Vec3<double>(0.5, 0.5, 0.5);
  r.at(2, 0) = Vec3<double>(0.75, 0.75, 0.75);
  const auto maps = build_error_maps(r, g, 0.5, 0.2);
  CHECK(maps.normalized(0, 0) == doctest::Approx(0.0));
  CHECK(maps.normalized(0, 1) == doctest::Approx(0.5));
  CHECK(maps.normalized(0, 2) == doctest::Approx(1.0));
  CHECK(maps.mask(0, 0) == 0);
  CHECK(maps.mask(0, 1) == 0);  // 0.5 > 0.5 is false: strict inequality
  CHECK(maps.mask(0, 2) == 1);
}

TEST_CASE("constant nonzero error map normalizes to all zeros") {
  Image<double> r(4, 4), g(4, 4);
  for (auto& p : r.pixels) p = Vec3<double>(0.3, 0.3, 0.3);
  const auto maps = build_error_maps(r, g, 0.25, 0.2);
  CHECK(maps.raw.minCoeff() == doctest::Approx(0.3));
  CHECK(maps.normalized.maxCoeff() == 0.0);
  CHECK(maps.mask.maxCoeff() == 0);
}

TEST_CASE("photometric loss combines L1 and SSIM with the lambda weight") {
  Rng rng(62);
  Image<double> r(16, 16), g(16, 16);
  for (auto& p : r.pixels)
    p = Vec3<double>(rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1));
  for (auto& p : g.pixels)
    p = Vec3<double>(rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1));
  const double lambda = 0.2;
  const auto maps = build_error_maps(r, g, 0.5, lambda);
  const double l1 = maps.raw.mean();
  const double expected = (1 - lambda) * l1 + lambda * (1 - ssim(r, g));
  CHECK(maps.photometric == doctest::Approx(expected).epsilon(1e-12));
  CHECK(maps.photometric >= 0.0);
}

TEST_CASE("build_error_maps rejects dimension mismatches") {
  Image<double> a(8, 8), b(4, 8);
  CHECK_THROWS(build_error_maps(a, b, 0.5, 0.2));
}
