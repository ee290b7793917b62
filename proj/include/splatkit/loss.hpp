// Copyright Contributors to the splatkit project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "splatkit/metrics.hpp"
#include "splatkit/types.hpp"

namespace splat {

template <typename T>
struct LossResult {
  T loss = T(0);
  T l1 = T(0);
  T ssim_value = T(0);
  Image<T> d_image;  // dL/d(rendered)
};

// Training objective: (1-lambda) L1 + lambda (1-SSIM), both terms averaged
// over pixels and channels, with its analytic gradient.
template <typename T>
inline LossResult<T> training_loss(const Image<T>& rendered, const Image<T>& ground_truth,
                                   T lambda) {
  require(rendered.width == ground_truth.width && rendered.height == ground_truth.height,
          "training_loss: image dimensions differ");
  LossResult<T> out;
  out.d_image = Image<T>(rendered.width, rendered.height);

  const T inv_n = T(1) / (T(3) * rendered.pixels.size());
  T l1 = T(0);
  for (size_t i = 0; i < rendered.pixels.size(); ++i) {
    const Vec3<T> diff = rendered.pixels[i] - ground_truth.pixels[i];
    l1 += diff.cwiseAbs().sum();
    for (int c = 0; c < 3; ++c) {
      const T s = diff[c] > T(0) ? T(1) : (diff[c] < T(0) ? T(-1) : T(0));
      out.d_image.pixels[i][c] = (T(1) - lambda) * s * inv_n;
    }
  }
  out.l1 = l1 * inv_n;

  Image<T> d_ssim;
  out.ssim_value = ssim_with_grad(rendered, ground_truth, d_ssim);
  for (size_t i = 0; i < rendered.pixels.size(); ++i)
    out.d_image.pixels[i] -= lambda * d_ssim.pixels[i];

  out.loss = (T(1) - lambda) * out.l1 + lambda * (T(1) - out.ssim_value);
  return out;
}

}  // namespace splat
