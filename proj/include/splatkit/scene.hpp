// Copyright Contributors to the splatkit project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "splatkit/sh.hpp"
#include "splatkit/types.hpp"

#include <limits>
#include <stdexcept>
#include <vector>

namespace splat {

// One anisotropic Gaussian primitive. Scale and opacity are stored
// pre-activation (log / logit) so the optimizer works on unconstrained
// parameters; activated values are always recomputed on demand.
template <typename T>
struct Gaussian3D {
  Vec3<T> mu = Vec3<T>::Zero();
  Vec4<T> rot = Vec4<T>(T(1), T(0), T(0), T(0));  // unit quaternion, w,x,y,z
  Vec3<T> log_scale = Vec3<T>::Zero();
  T opacity_logit = T(0);
  ShMatrix<T> sh;  // (deg+1)^2 rows x RGB

  Vec3<T> scale() const { return log_scale.array().exp().matrix(); }
  T opacity() const { return sigmoid(opacity_logit); }
};

template <typename T>
struct Scene {
  std::vector<Gaussian3D<T>> gaussians;
  int sh_degree = 3;

  int size() const { return static_cast<int>(gaussians.size()); }

  template <typename U>
  Scene<U> cast() const {
    Scene<U> out;
    out.sh_degree = sh_degree;
    out.gaussians.reserve(gaussians.size());
    for (const auto& g : gaussians) {
      Gaussian3D<U> h;
      h.mu = g.mu.template cast<U>();
      h.rot = g.rot.template cast<U>();
      h.log_scale = g.log_scale.template cast<U>();
      h.opacity_logit = static_cast<U>(g.opacity_logit);
      h.sh = g.sh.template cast<U>();
      out.gaussians.push_back(std::move(h));
    }
    return out;
  }
};

// Rotation matrix of a quaternion (w,x,y,z). Normalizes internally, so
// callers may pass unnormalized optimizer state.
template <typename T>
inline Mat3<T> quat_to_rotation(const Vec4<T>& q_in) {
  const Vec4<T> q = q_in.normalized();
  const T w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3<T> r;
  r << T(1) - T(2) * (y * y + z * z), T(2) * (x * y - w * z), T(2) * (x * z + w * y),
      T(2) * (x * y + w * z), T(1) - T(2) * (x * x + z * z), T(2) * (y * z - w * x),
      T(2) * (x * z - w * y), T(2) * (y * z + w * x), T(1) - T(2) * (x * x + y * y);
  return r;
}

// Chains dL/dR back to the unnormalized quaternion, including the
// normalization Jacobian (I - qq^T)/|q|.
template <typename T>
inline Vec4<T> quat_rotation_backward(const Vec4<T>& q_in, const Mat3<T>& d_r) {
  const T norm = q_in.norm();
  const Vec4<T> q = q_in / norm;
  const T w = q[0], x = q[1], y = q[2], z = q[3];

  Mat3<T> dw, dx, dy, dz;
  dw << T(0), T(-2) * z, T(2) * y, T(2) * z, T(0), T(-2) * x, T(-2) * y, T(2) * x, T(0);
  dx << T(0), T(2) * y, T(2) * z, T(2) * y, T(-4) * x, T(-2) * w, T(2) * z, T(2) * w, T(-4) * x;
  dy << T(-4) * y, T(2) * x, T(2) * w, T(2) * x, T(0), T(2) * z, T(-2) * w, T(2) * z, T(-4) * y;
  dz << T(-4) * z, T(-2) * w, T(2) * x, T(2) * w, T(-4) * z, T(2) * y, T(2) * x, T(2) * y, T(0);

  Vec4<T> d_unit(d_r.cwiseProduct(dw).sum(), d_r.cwiseProduct(dx).sum(),
                 d_r.cwiseProduct(dy).sum(), d_r.cwiseProduct(dz).sum());
  return (d_unit - q * q.dot(d_unit)) / norm;
}

// Sigma = R S S^T R^T with S = diag(scale).
template <typename T>
inline Mat3<T> covariance_3d(const Vec4<T>& rot, const Vec3<T>& scale) {
  if (!rot.allFinite() || !scale.allFinite())
    throw std::invalid_argument("covariance_3d: non-finite rotation or scale");
  if ((scale.array() <= T(0)).any())
    throw std::invalid_argument("covariance_3d: scale must be positive");
  const Mat3<T> r = quat_to_rotation(rot);
  const Mat3<T> m = r * scale.asDiagonal();
  return m * m.transpose();
}

// Backward of covariance_3d w.r.t. the unnormalized quaternion and the
// activated scale. d_sigma is the full-matrix upstream gradient.
template <typename T>
inline void covariance_3d_backward(const Vec4<T>& rot, const Vec3<T>& scale, const Mat3<T>& d_sigma,
                                   Vec4<T>& d_rot, Vec3<T>& d_scale) {
  const Mat3<T> r = quat_to_rotation(rot);
  const Mat3<T> m = r * scale.asDiagonal();
  // Sigma = M M^T  =>  dL/dM = (G + G^T) M
  const Mat3<T> d_m = (d_sigma + d_sigma.transpose()) * m;
  const Mat3<T> d_r = d_m * scale.asDiagonal();
  d_scale = (d_m.cwiseProduct(r)).colwise().sum().transpose();
  d_rot = quat_rotation_backward(rot, d_r);
}

// Builds one Gaussian per input point. The isotropic scale is the log of
// the mean distance to the 3 nearest neighbors (fewer if the cloud is
// smaller; 1.0 for a single point), opacity starts at 0.1 and the DC SH
// term is the inverse of the evaluation offset.
template <typename T>
inline Scene<T> init_from_points(const std::vector<std::pair<Vec3<T>, Vec3<T>>>& points,
                                 int sh_degree = 3) {
  if (points.empty()) throw std::invalid_argument("init_from_points: empty point cloud");
  const int n = static_cast<int>(points.size());
  Scene<T> scene;
  scene.sh_degree = sh_degree;
  scene.gaussians.reserve(n);

  for (int i = 0; i < n; ++i) {
    // Mean distance to up to 3 nearest neighbors, O(n^2) brute force.
    T d0 = std::numeric_limits<T>::max(), d1 = d0, d2 = d0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const T d = (points[j].first - points[i].first).norm();
      if (d < d0) {
        d2 = d1; d1 = d0; d0 = d;
      } else if (d < d1) {
        d2 = d1; d1 = d;
      } else if (d < d2) {
        d2 = d;
      }
    }
    T mean = T(1);
    if (n == 2) mean = d0;
    else if (n == 3) mean = (d0 + d1) / T(2);
    else if (n > 3) mean = (d0 + d1 + d2) / T(3);
    mean = std::max(mean, T(1e-7));

    Gaussian3D<T> g;
    g.mu = points[i].first;
    g.log_scale = Vec3<T>::Constant(std::log(mean));
    g.opacity_logit = logit(T(0.1));
    g.sh = ShMatrix<T>::Zero(sh_coeff_count(sh_degree), 3);
    g.sh.row(0) = ((points[i].second.array() - T(0.5)) / T(kShC0)).matrix().transpose();
    scene.gaussians.push_back(std::move(g));
  }
  return scene;
}

}  // namespace splat
