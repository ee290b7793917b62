// Copyright Contributors to the splatkit project
// SPDX-License-Identifier: Apache-2.0
#include "splatkit/loss.hpp"
#include "splatkit/metrics.hpp"

#include "helpers.hpp"

#include <doctest.h>

using namespace splat;

namespace {

Image<double> random_image(Rng& rng, int w, int h) {
  Image<double> img(w, h);
  for (auto& p : img.pixels)
    p = Vec3<double>(rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95));
  return img;
}

}  // namespace

TEST_CASE("psnr arithmetic and the cap") {
  Image<double> a(8, 8), b(8, 8);
  CHECK(psnr(a, b) == 100.0);  // identical

  // constant squared error 0.01 -> 20 dB
  for (auto& p : b.pixels) p = Vec3<double>(0.1, 0.1, 0.1);
  CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("ssim of an image with itself is 1") {
  Rng rng(51);
  const Image<double> img = random_image(rng, 16, 16);
  CHECK(ssim(img, img) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ssim is symmetric and below 1 for different images") {
  Rng rng(52);
  const Image<double> a = random_image(rng, 16, 16);
  const Image<double> b = random_image(rng, 16, 16);
  const double s = ssim(a, b);
  CHECK(s < 1.0);
  CHECK(ssim(b, a) == doctest::Approx(s).epsilon(1e-12));
}

TEST_CASE("training_loss on identical images is exactly zero with zero gradient") {
  Rng rng(53);
  const Image<double> img = random_image(rng, 12, 12);
  const auto res = training_loss(img, img, 0.2);
  CHECK(res.loss == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(res.l1 == 0.0);
  CHECK(res.ssim_value == doctest::Approx(1.0).epsilon(1e-12));
  for (const auto& p : res.d_image.pixels) CHECK(p.norm() < 1e-12);
}

TEST_CASE("training_loss rejects dimension mismatches") {
  Image<double> a(8, 8), b(8, 4);
  CHECK_THROWS(training_loss(a, b, 0.2));
  CHECK_THROWS(ssim(a, b));
  CHECK_THROWS(psnr(a, b));
}

TEST_CASE("training_loss gradient matches finite differences on a random 16x16 pair") {
  Rng rng(54);
  Image<double> x = random_image(rng, 16, 16);
  const Image<double> y = random_image(rng, 16, 16);
  const double lambda = 0.2;
  const auto res = training_loss(x, y, lambda);

  // probe a spread of pixels rather than all 768 coordinates
  for (int probe = 0; probe < 40; ++probe) {
    const int idx = static_cast<int>(rng.bounded(x.pixels.size()));
    const int c = static_cast<int>(rng.bounded(3));
    const double fd = test::central_diff(
        [&](double v) {
          Image<double> xx = x;
          xx.pixels[idx][c] = v;
          return static_cast<double>(training_loss(xx, y, lambda).loss);
        },
        x.pixels[idx][c]);
    CHECK(test::rel_err(res.d_image.pixels[idx][c], fd) < 1e-4);
  }
}

TEST_CASE("ssim gradient matches finite differences") {
  Rng rng(55);
  Image<double> x = random_image(rng, 12, 12);
  const Image<double> y = random_image(rng, 12, 12);
  Image<double> d_x;
  ssim_with_grad(x, y, d_x);
  for (int probe = 0; probe < 30; ++probe) {
    const int idx = static_cast<int>(rng.bounded(x.pixels.size()));
    const int c = static_cast<int>(rng.bounded(3));
    const double fd = test::central_diff(
        [&](double v) {
          Image<double> xx = x;
          xx.pixels[idx][c] = v;
          return ssim(xx, y);
        },
        x.pixels[idx][c]);
    CHECK(test::rel_err(d_x.pixels[idx][c], fd) < 1e-4);
  }
}
