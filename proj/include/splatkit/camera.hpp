// Copyright Contributors to the splatkit project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "splatkit/scene.hpp"
#include "splatkit/sh.hpp"
#include "splatkit/types.hpp"

#include <cmath>
#include <optional>

namespace splat {

// Low-pass floor added to the diagonal of every projected covariance, in
// squared pixels. Keeps footprints at least ~a pixel wide and the 2x2
// invertible.
inline constexpr double kCov2dFloor = 0.3;
// Culling guard band: multiples of the 3-sigma extent by which the image
// rectangle is dilated before rejecting an off-screen mean.
inline constexpr double kCullGuard = 1.3;

template <typename T>
struct Camera {
  int width = 0;
  int height = 0;
  T fx = T(0), fy = T(0), cx = T(0), cy = T(0);
  Mat4<T> world_to_cam = Mat4<T>::Identity();
  T near = T(0.2);

  Mat3<T> rotation() const { return world_to_cam.template topLeftCorner<3, 3>(); }
  Vec3<T> translation() const { return world_to_cam.template topRightCorner<3, 1>(); }
  Vec3<T> center() const { return -(rotation().transpose() * translation()); }

  void validate() const {
    require(fx > T(0) && fy > T(0), "camera: focal lengths must be positive");
    require(width > 0 && height > 0, "camera: empty image");
    const Mat3<T> r = rotation();
    require((r * r.transpose() - Mat3<T>::Identity()).norm() < T(1e-6),
            "camera: world_to_cam rotation block is not orthonormal");
    require(std::abs(r.determinant() - T(1)) < T(1e-6),
            "camera: world_to_cam rotation block must have det +1");
  }

  template <typename U>
  Camera<U> cast() const {
    Camera<U> c;
    c.width = width;
    c.height = height;
    c.fx = static_cast<U>(fx);
    c.fy = static_cast<U>(fy);
    c.cx = static_cast<U>(cx);
    c.cy = static_cast<U>(cy);
    c.world_to_cam = world_to_cam.template cast<U>();
    c.near = static_cast<U>(near);
    return c;
  }
};

template <typename T>
struct ProjectedGaussian {
  Vec2<T> mu2d = Vec2<T>::Zero();
  Mat2<T> cov2d = Mat2<T>::Zero();
  Mat2<T> cov2d_inv = Mat2<T>::Zero();
  T depth = T(0);
  Vec3<T> color = Vec3<T>::Zero();
  T opacity = T(0);
  int source_index = -1;
};

template <typename T>
inline T max_eigenvalue_2x2(const Mat2<T>& m) {
  const T mid = (m(0, 0) + m(1, 1)) / T(2);
  const T h = (m(0, 0) - m(1, 1)) / T(2);
  return mid + std::sqrt(h * h + m(0, 1) * m(0, 1));
}

// Pinhole Jacobian of the projective transform, evaluated at camera-space
// point t (first-order EWA).
template <typename T>
inline Mat23<T> projection_jacobian(const Camera<T>& cam, const Vec3<T>& t) {
  const T iz = T(1) / t[2];
  const T iz2 = iz * iz;
  Mat23<T> j;
  j << cam.fx * iz, T(0), -cam.fx * t[0] * iz2,
      T(0), cam.fy * iz, -cam.fy * t[1] * iz2;
  return j;
}

// Projects one Gaussian into a view. Returns nullopt when culled: behind
// the near plane, or mean outside the image rectangle dilated by
// kCullGuard times the 3-sigma extent.
template <typename T>
inline std::optional<ProjectedGaussian<T>> project(const Gaussian3D<T>& g, const Camera<T>& cam,
                                                   int sh_degree, int source_index = -1) {
  const Mat3<T> w_rot = cam.rotation();
  const Vec3<T> t = w_rot * g.mu + cam.translation();
  if (t[2] <= cam.near) return std::nullopt;

  const Mat23<T> j = projection_jacobian(cam, t);
  const Mat23<T> m = j * w_rot;
  const Mat3<T> sigma3 = covariance_3d(g.rot, g.scale());
  Mat2<T> cov2d = m * sigma3 * m.transpose();
  cov2d(0, 0) += T(kCov2dFloor);
  cov2d(1, 1) += T(kCov2dFloor);

  ProjectedGaussian<T> pg;
  pg.mu2d = Vec2<T>(cam.fx * t[0] / t[2] + cam.cx, cam.fy * t[1] / t[2] + cam.cy);

  const T radius = T(3) * std::sqrt(max_eigenvalue_2x2(cov2d));
  const T guard = T(kCullGuard) * radius;
  if (pg.mu2d[0] < -guard || pg.mu2d[0] > T(cam.width - 1) + guard || pg.mu2d[1] < -guard ||
      pg.mu2d[1] > T(cam.height - 1) + guard)
    return std::nullopt;

  const T det = cov2d(0, 0) * cov2d(1, 1) - cov2d(0, 1) * cov2d(1, 0);
  pg.cov2d = cov2d;
  pg.cov2d_inv << cov2d(1, 1) / det, -cov2d(0, 1) / det, -cov2d(1, 0) / det, cov2d(0, 0) / det;
  pg.depth = t[2];
  pg.color = evaluate_sh(g.sh, Vec3<T>((g.mu - cam.center()).normalized()), sh_degree);
  pg.opacity = sigmoid(g.opacity_logit);
  pg.source_index = source_index;
  return pg;
}

template <typename T>
struct GaussianGrads {
  Vec3<T> mu = Vec3<T>::Zero();
  Vec4<T> rot = Vec4<T>::Zero();
  Vec3<T> log_scale = Vec3<T>::Zero();
  T opacity_logit = T(0);
  ShMatrix<T> sh;
};

// Projects a whole scene into one view, dropping culled Gaussians.
// source_index links each footprint back to its scene slot.
template <typename T>
inline std::vector<ProjectedGaussian<T>> project_scene(const Scene<T>& scene,
                                                       const Camera<T>& cam) {
  std::vector<ProjectedGaussian<T>> pgs;
  pgs.reserve(scene.gaussians.size());
  for (int i = 0; i < scene.size(); ++i)
    if (auto pg = project(scene.gaussians[i], cam, scene.sh_degree, i)) pgs.push_back(*pg);
  return pgs;
}

// dL/dcov2d from dL/dcov2d_inv:  dA = -A^-1 dB A^-1 for symmetric A.
template <typename T>
inline Mat2<T> cov_grad_from_inv_grad(const Mat2<T>& cov2d_inv, const Mat2<T>& d_inv) {
  return -(cov2d_inv * d_inv * cov2d_inv);
}

// Exact adjoint of project() composed with the parameter activations.
// Upstream gradients arrive on mu2d, cov2d (full-matrix convention),
// the evaluated color and the activated opacity.
template <typename T>
inline GaussianGrads<T> project_backward(const Gaussian3D<T>& g, const Camera<T>& cam,
                                         int sh_degree, const Vec2<T>& d_mu2d,
                                         const Mat2<T>& d_cov2d, const Vec3<T>& d_color,
                                         T d_opacity) {
  GaussianGrads<T> out;
  out.sh = ShMatrix<T>::Zero(g.sh.rows(), 3);

  const Mat3<T> w_rot = cam.rotation();
  const Vec3<T> t = w_rot * g.mu + cam.translation();
  const Mat23<T> j = projection_jacobian(cam, t);
  const Mat23<T> m = j * w_rot;
  const Vec3<T> scale = g.scale();
  const Mat3<T> sigma3 = covariance_3d(g.rot, scale);

  // opacity: alpha = sigmoid(logit)
  const T sig = sigmoid(g.opacity_logit);
  out.opacity_logit = d_opacity * sig * (T(1) - sig);

  // color: SH evaluation along the normalized camera-to-mean direction
  {
    const Vec3<T> rel = g.mu - cam.center();
    const T dist = rel.norm();
    const Vec3<T> dir = rel / dist;
    Vec3<T> d_dir;
    evaluate_sh_backward(g.sh, dir, sh_degree, d_color, out.sh, d_dir);
    out.mu += (d_dir - dir * dir.dot(d_dir)) / dist;
  }

  // cov2d = M Sigma3 M^T + floor;  floor is additive so gradients pass through
  const Mat23<T> d_m = (d_cov2d + d_cov2d.transpose()) * m * sigma3;
  const Mat3<T> d_sigma3 = m.transpose() * d_cov2d * m;
  {
    Vec4<T> d_rot;
    Vec3<T> d_scale;
    covariance_3d_backward(g.rot, scale, d_sigma3, d_rot, d_scale);
    out.rot += d_rot;
    out.log_scale += (d_scale.array() * scale.array()).matrix();
  }

  // The Jacobian itself depends on t, so part of the covariance gradient
  // flows back into the mean.
  Vec3<T> d_t = Vec3<T>::Zero();
  {
    const Mat23<T> d_j = d_m * w_rot.transpose();
    const T iz = T(1) / t[2];
    const T iz2 = iz * iz;
    const T iz3 = iz2 * iz;
    d_t[0] += d_j(0, 2) * (-cam.fx * iz2);
    d_t[1] += d_j(1, 2) * (-cam.fy * iz2);
    d_t[2] += d_j(0, 0) * (-cam.fx * iz2) + d_j(0, 2) * (T(2) * cam.fx * t[0] * iz3) +
              d_j(1, 1) * (-cam.fy * iz2) + d_j(1, 2) * (T(2) * cam.fy * t[1] * iz3);
  }

  // mu2d is the perspective projection of t; its Jacobian is exactly j.
  d_t += j.transpose() * d_mu2d;
  out.mu += w_rot.transpose() * d_t;
  return out;
}

}  // namespace splat
