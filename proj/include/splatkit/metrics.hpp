// Copyright Contributors to the splatkit project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "splatkit/types.hpp"

#include <cmath>

namespace splat {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

template <typename T>
inline Eigen::Matrix<T, kSsimWindow, 1> ssim_kernel() {
  Eigen::Matrix<T, kSsimWindow, 1> k;
  const int half = kSsimWindow / 2;
  for (int i = 0; i < kSsimWindow; ++i) {
    const T d = T(i - half);
    k[i] = std::exp(-(d * d) / (T(2) * T(kSsimSigma) * T(kSsimSigma)));
  }
  return k / k.sum();
}

// Separable Gaussian blur with zero padding. Symmetric kernel, so this is
// also its own adjoint.
template <typename T>
inline ScalarMap<T> gauss_filter(const ScalarMap<T>& in) {
  static const Eigen::Matrix<T, kSsimWindow, 1> k = ssim_kernel<T>();
  const int h = static_cast<int>(in.rows());
  const int w = static_cast<int>(in.cols());
  const int half = kSsimWindow / 2;
  ScalarMap<T> tmp = ScalarMap<T>::Zero(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      T s = T(0);
      const int o0 = std::max(-half, -x), o1 = std::min(half, w - 1 - x);
      for (int o = o0; o <= o1; ++o) s += k[o + half] * in(y, x + o);
      tmp(y, x) = s;
    }
  ScalarMap<T> out = ScalarMap<T>::Zero(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      T s = T(0);
      const int o0 = std::max(-half, -y), o1 = std::min(half, h - 1 - y);
      for (int o = o0; o <= o1; ++o) s += k[o + half] * tmp(y + o, x);
      out(y, x) = s;
    }
  return out;
}

namespace detail {

template <typename T>
struct SsimChannelMaps {
  ScalarMap<T> mu_x, mu_y, mxx, myy, mxy, s;
};

template <typename T>
inline SsimChannelMaps<T> ssim_channel(const ScalarMap<T>& x, const ScalarMap<T>& y) {
  SsimChannelMaps<T> m;
  m.mu_x = gauss_filter(x);
  m.mu_y = gauss_filter(y);
  m.mxx = gauss_filter<T>(x * x);
  m.myy = gauss_filter<T>(y * y);
  m.mxy = gauss_filter<T>(x * y);
  const ScalarMap<T> sxx = m.mxx - m.mu_x * m.mu_x;
  const ScalarMap<T> syy = m.myy - m.mu_y * m.mu_y;
  const ScalarMap<T> sxy = m.mxy - m.mu_x * m.mu_y;
  const ScalarMap<T> a1 = T(2) * m.mu_x * m.mu_y + T(kSsimC1);
  const ScalarMap<T> a2 = T(2) * sxy + T(kSsimC2);
  const ScalarMap<T> b1 = m.mu_x * m.mu_x + m.mu_y * m.mu_y + T(kSsimC1);
  const ScalarMap<T> b2 = sxx + syy + T(kSsimC2);
  m.s = (a1 * a2) / (b1 * b2);
  return m;
}

}  // namespace detail

template <typename T>
inline T ssim(const Image<T>& a, const Image<T>& b) {
  require(a.width == b.width && a.height == b.height, "ssim: image dimensions differ");
  T total = T(0);
  for (int c = 0; c < 3; ++c)
    total += detail::ssim_channel<T>(a.channel(c), b.channel(c)).s.mean();
  return total / T(3);
}

// SSIM and its gradient with respect to the first image.
template <typename T>
inline T ssim_with_grad(const Image<T>& a, const Image<T>& b, Image<T>& d_a) {
  require(a.width == b.width && a.height == b.height, "ssim: image dimensions differ");
  d_a = Image<T>(a.width, a.height);
  const T norm = T(1) / (T(3) * T(a.width) * T(a.height));
  T total = T(0);
  for (int c = 0; c < 3; ++c) {
    const ScalarMap<T> x = a.channel(c);
    const ScalarMap<T> y = b.channel(c);
    const auto m = detail::ssim_channel<T>(x, y);
    total += m.s.mean();

    const ScalarMap<T> a1 = T(2) * m.mu_x * m.mu_y + T(kSsimC1);
    const ScalarMap<T> a2 = T(2) * (m.mxy - m.mu_x * m.mu_y) + T(kSsimC2);
    const ScalarMap<T> b1 = m.mu_x * m.mu_x + m.mu_y * m.mu_y + T(kSsimC1);
    const ScalarMap<T> b2 = (m.mxx - m.mu_x * m.mu_x) + (m.myy - m.mu_y * m.mu_y) + T(kSsimC2);
    const ScalarMap<T> inv_bb = (b1 * b2).inverse();

    // partials of S per pixel, each weighted by the mean normalization
    const ScalarMap<T> u_mu = norm * (a2 * inv_bb * T(2) * m.mu_y - a1 * inv_bb * T(2) * m.mu_y -
                                      m.s / b1 * T(2) * m.mu_x + m.s / b2 * T(2) * m.mu_x);
    const ScalarMap<T> u_mxy = norm * (a1 * inv_bb * T(2));
    const ScalarMap<T> u_mxx = norm * (-m.s / b2);

    const ScalarMap<T> g = gauss_filter<T>(u_mu) + gauss_filter<T>(u_mxy) * y +
                           gauss_filter<T>(u_mxx) * T(2) * x;
    for (int py = 0; py < a.height; ++py)
      for (int px = 0; px < a.width; ++px) d_a.at(px, py)[c] = g(py, px);
  }
  return total / T(3);
}

// PSNR in dB on [0,1] images, capped at 100 dB for near-zero MSE.
template <typename T>
inline double psnr(const Image<T>& a, const Image<T>& b) {
  require(a.width == b.width && a.height == b.height, "psnr: image dimensions differ");
  double mse = 0;
  for (size_t i = 0; i < a.pixels.size(); ++i)
    mse += (a.pixels[i] - b.pixels[i]).template cast<double>().squaredNorm();
  mse /= 3.0 * a.pixels.size();
  if (mse < 1e-10) return 100.0;
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace splat
