// Copyright Contributors to the splatkit project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace splat {

template <typename T> using Vec2 = Eigen::Matrix<T, 2, 1>;
template <typename T> using Vec3 = Eigen::Matrix<T, 3, 1>;
template <typename T> using Vec4 = Eigen::Matrix<T, 4, 1>;
template <typename T> using Mat2 = Eigen::Matrix<T, 2, 2>;
template <typename T> using Mat3 = Eigen::Matrix<T, 3, 3>;
template <typename T> using Mat4 = Eigen::Matrix<T, 4, 4>;
template <typename T> using Mat23 = Eigen::Matrix<T, 2, 3>;
// SH coefficients: one row per basis function, columns are RGB.
template <typename T> using ShMatrix = Eigen::Matrix<T, Eigen::Dynamic, 3>;
// Scalar-valued per-pixel maps (H rows x W cols).
template <typename T> using ScalarMap = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic>;
using MaskMap = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

template <typename T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
inline T logit(T x) {
  return std::log(x / (T(1) - x));
}

/// RGB image, row-major, values nominally in [0,1].
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<Vec3<T>> pixels;

  Image() = default;
  Image(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h, Vec3<T>::Zero()) {}

  Vec3<T>& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
  const Vec3<T>& at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }

  ScalarMap<T> channel(int c) const {
    ScalarMap<T> out(height, width);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        out(y, x) = at(x, y)[c];
    return out;
  }

  template <typename U>
  Image<U> cast() const {
    Image<U> out(width, height);
    for (size_t i = 0; i < pixels.size(); ++i) out.pixels[i] = pixels[i].template cast<U>();
    return out;
  }
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

}  // namespace splat
