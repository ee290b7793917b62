// Copyright Contributors to the splatkit project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "splatkit/metrics.hpp"
#include "splatkit/types.hpp"

namespace splat {

// Per-view reconstruction-error products: channel-mean absolute error,
// its min-max normalization, the high-error mask, and the photometric
// loss of the whole view.
template <typename T>
struct ErrorMaps {
  ScalarMap<T> raw;         // channel-mean |rendered - gt| per pixel
  ScalarMap<T> normalized;  // min-max normalized raw, in [0,1]
  MaskMap mask;             // normalized > tau
  T photometric = T(0);     // (1-lambda) L1 + lambda (1-SSIM)
};

template <typename T>
inline ErrorMaps<T> build_error_maps(const Image<T>& rendered, const Image<T>& ground_truth,
                                     T tau, T lambda) {
  require(rendered.width == ground_truth.width && rendered.height == ground_truth.height,
          "build_error_maps: image dimensions differ");
  const int w = rendered.width, h = rendered.height;
  ErrorMaps<T> out;
  out.raw = ScalarMap<T>(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      out.raw(y, x) = (rendered.at(x, y) - ground_truth.at(x, y)).cwiseAbs().sum() / T(3);

  const T lo = out.raw.minCoeff();
  const T hi = out.raw.maxCoeff();
  // Degenerate map (constant error) normalizes to all zeros: no pixel is
  // singled out as high-error.
  out.normalized = hi > lo ? ScalarMap<T>((out.raw - lo) / (hi - lo)) : ScalarMap<T>::Zero(h, w);
  out.mask = (out.normalized > tau).template cast<std::uint8_t>();

  const T l1 = out.raw.mean();
  out.photometric = (T(1) - lambda) * l1 + lambda * (T(1) - ssim(rendered, ground_truth));
  return out;
}

}  // namespace splat
