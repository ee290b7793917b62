// Copyright Contributors to the splatkit project
// SPDX-License-Identifier: Apache-2.0
//
// Test-only oracles and generators. These stay independent of the
// implementation paths they check: the brute-force renderer loops over
// every Gaussian per pixel with no tiling, and the finite-difference
// harness only ever calls forward evaluations.
#pragma once

#include "splatkit/camera.hpp"
#include "splatkit/raster.hpp"
#include "splatkit/rng.hpp"
#include "splatkit/scene.hpp"
#include "splatkit/types.hpp"

#include <functional>
#include <numeric>
#include <vector>

namespace splat::test {

// Untiled reference renderer: per pixel, every Gaussian in depth order,
// same cutoffs and same expression order as the tiled path.
template <typename T>
inline RenderOutputs<T> brute_force_render(const std::vector<ProjectedGaussian<T>>& pgs, int width,
                                           int height, const MaskMap* mask = nullptr,
                                           std::vector<int>* counts = nullptr) {
  std::vector<int> order(pgs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (pgs[a].depth != pgs[b].depth) return pgs[a].depth < pgs[b].depth;
    return a < b;
  });

  RenderOutputs<T> out;
  out.image = Image<T>(width, height);
  out.transmittance = ScalarMap<T>::Ones(height, width);
  out.contrib_count = Eigen::ArrayXXi::Zero(height, width);
  for (int py = 0; py < height; ++py) {
    for (int px = 0; px < width; ++px) {
      T trans = T(1);
      Vec3<T> c = Vec3<T>::Zero();
      int n = 0;
      const bool masked = mask && (*mask)(py, px) != 0;
      for (const int idx : order) {
        const ProjectedGaussian<T>& pg = pgs[idx];
        const T dx = T(px) - pg.mu2d[0];
        const T dy = T(py) - pg.mu2d[1];
        const T q = pg.cov2d_inv(0, 0) * dx * dx + T(2) * pg.cov2d_inv(0, 1) * dx * dy +
                    pg.cov2d_inv(1, 1) * dy * dy;
        if (q < T(0)) continue;
        const T alpha = std::min(T(kAlphaCap), pg.opacity * std::exp(T(-0.5) * q));
        if (alpha < T(kAlphaMin)) continue;
        c += trans * alpha * pg.color;
        ++n;
        if (masked && counts) ++(*counts)[pg.source_index];
        trans *= T(1) - alpha;
        if (trans < T(kTransmitMin)) break;
      }
      out.image.at(px, py) = c;
      out.transmittance(py, px) = trans;
      out.contrib_count(py, px) = n;
    }
  }
  return out;
}

// Random projected Gaussians with footprints inside (or near) the image.
// max_opacity <= ~0.35 keeps every contributing pixel within the 3-sigma
// AABB, which is what the bit-exact tiled-vs-untiled comparison needs.
template <typename T>
inline std::vector<ProjectedGaussian<T>> random_projected(Rng& rng, int n, int width, int height,
                                                          double max_opacity = 0.34,
                                                          double min_opacity = 0.05) {
  std::vector<ProjectedGaussian<T>> pgs;
  pgs.reserve(n);
  for (int i = 0; i < n; ++i) {
    ProjectedGaussian<T> pg;
    pg.mu2d = Vec2<T>(T(rng.uniform(-2.0, width + 2.0)), T(rng.uniform(-2.0, height + 2.0)));
    Mat2<T> a;
    a << T(rng.uniform(-2, 2)), T(rng.uniform(-2, 2)), T(rng.uniform(-2, 2)),
        T(rng.uniform(-2, 2));
    pg.cov2d = a * a.transpose();
    pg.cov2d(0, 0) += T(kCov2dFloor);
    pg.cov2d(1, 1) += T(kCov2dFloor);
    const T det = pg.cov2d.determinant();
    pg.cov2d_inv << pg.cov2d(1, 1) / det, -pg.cov2d(0, 1) / det, -pg.cov2d(1, 0) / det,
        pg.cov2d(0, 0) / det;
    pg.depth = T(rng.uniform(0.5, 10.0));
    pg.color = Vec3<T>(T(rng.uniform(0, 1)), T(rng.uniform(0, 1)), T(rng.uniform(0, 1)));
    pg.opacity = T(rng.uniform(min_opacity, max_opacity));
    pg.source_index = i;
    pgs.push_back(pg);
  }
  return pgs;
}

// Random world-space scene in front of a default camera at the origin.
template <typename T>
inline Scene<T> random_scene(Rng& rng, int n, int sh_degree = 2, double max_opacity = 0.8) {
  Scene<T> scene;
  scene.sh_degree = sh_degree;
  for (int i = 0; i < n; ++i) {
    Gaussian3D<T> g;
    g.mu = Vec3<T>(T(rng.uniform(-0.6, 0.6)), T(rng.uniform(-0.6, 0.6)), T(rng.uniform(2.0, 5.0)));
    Vec4<T> q;
    for (int d = 0; d < 4; ++d) q[d] = T(rng.normal());
    g.rot = q.normalized();
    for (int d = 0; d < 3; ++d) g.log_scale[d] = T(std::log(rng.uniform(0.03, 0.15)));
    g.opacity_logit = logit(T(rng.uniform(0.1, max_opacity)));
    g.sh = ShMatrix<T>::Zero(sh_coeff_count(sh_degree), 3);
    for (int m = 0; m < sh_coeff_count(sh_degree); ++m)
      for (int c = 0; c < 3; ++c)
        g.sh(m, c) = T(rng.uniform(-0.3, 0.3)) + (m == 0 ? T(rng.uniform(0.2, 1.2)) : T(0));
    scene.gaussians.push_back(std::move(g));
  }
  return scene;
}

template <typename T>
inline Camera<T> default_camera(int width = 32, int height = 32) {
  Camera<T> cam;
  cam.width = width;
  cam.height = height;
  cam.fx = cam.fy = T(0.9) * width;
  cam.cx = T(width - 1) / T(2);
  cam.cy = T(height - 1) / T(2);
  cam.near = T(0.2);
  cam.world_to_cam = Mat4<T>::Identity();
  return cam;
}

// Central finite difference of a scalar functional.
inline double central_diff(const std::function<double(double)>& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2 * h);
}

// Relative error with an absolute floor so near-zero gradients compare
// on an absolute scale.
inline double rel_err(double a, double b, double floor = 1e-7) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace splat::test
