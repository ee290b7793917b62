// Copyright Contributors to the splatkit project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "splatkit/camera.hpp"
#include "splatkit/parallel.hpp"
#include "splatkit/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

namespace splat {

// Blending cutoffs inherited from the reference splatting pipeline.
inline constexpr double kAlphaCap = 0.99;       // per-sample alpha ceiling
inline constexpr double kAlphaMin = 1.0 / 255;  // minimum contributing alpha
inline constexpr double kTransmitMin = 1e-4;    // front-to-back termination
inline constexpr double kBinSigma = 3.0;        // AABB binning extent
// Squared Mahalanobis radius of the 3-sigma ellipse. The compact-box
// threshold is capped here so compact binning never exceeds the AABB bin.
inline constexpr double kBinMahaMax = kBinSigma * kBinSigma;

struct TileGrid {
  int width = 0;
  int height = 0;
  int tile_size = 16;
  int tiles_x = 0;
  int tiles_y = 0;
  // Per tile: projected-Gaussian indices in ascending depth order.
  std::vector<std::vector<int>> tiles;

  int tile_count() const { return tiles_x * tiles_y; }
};

enum class BinMode { kAabb, kCompact };

template <typename T>
struct BinningConfig {
  BinMode mode = BinMode::kAabb;
  T beta = T(1);
  T tau_alpha = T(1.0 / 255);
};

inline TileGrid make_tile_grid(int width, int height, int tile_size = 16) {
  TileGrid grid;
  grid.width = width;
  grid.height = height;
  grid.tile_size = tile_size;
  grid.tiles_x = (width + tile_size - 1) / tile_size;
  grid.tiles_y = (height + tile_size - 1) / tile_size;
  grid.tiles.assign(static_cast<size_t>(grid.tile_count()), {});
  return grid;
}

// Tiles overlapping the axis-aligned square mu2d +- 3 sqrt(lambda_max).
template <typename T>
inline std::vector<int> bin_aabb(const ProjectedGaussian<T>& pg, const TileGrid& grid) {
  const T r = T(kBinSigma) * std::sqrt(max_eigenvalue_2x2(pg.cov2d));
  const int ts = grid.tile_size;
  const int tx0 = static_cast<int>(std::floor((pg.mu2d[0] - r) / ts));
  const int tx1 = static_cast<int>(std::floor((pg.mu2d[0] + r) / ts));
  const int ty0 = static_cast<int>(std::floor((pg.mu2d[1] - r) / ts));
  const int ty1 = static_cast<int>(std::floor((pg.mu2d[1] + r) / ts));
  std::vector<int> out;
  if (tx1 < 0 || ty1 < 0 || tx0 >= grid.tiles_x || ty0 >= grid.tiles_y) return out;
  for (int ty = std::max(ty0, 0); ty <= std::min(ty1, grid.tiles_y - 1); ++ty)
    for (int tx = std::max(tx0, 0); tx <= std::min(tx1, grid.tiles_x - 1); ++tx)
      out.push_back(ty * grid.tiles_x + tx);
  return out;
}

// Compact-box Mahalanobis threshold: alpha decays as exp(-A/2), so the
// contribution drops below tau_alpha exactly at A = 2 ln(sigma/tau_alpha);
// beta scales the retained region.
template <typename T>
inline T compact_threshold(T sigma, T tau_alpha, T beta) {
  return beta * (T(2) * std::log(sigma / tau_alpha));
}

// Exact minimum of (p-mu)^T conic (p-mu) over the rectangle
// [x0,x1]x[y0,y1]. Convex quadratic over a box: either the center is
// inside, or the minimum lies on one of the four edges, each a clamped
// 1-D quadratic.
template <typename T>
inline T min_mahalanobis_on_rect(const Mat2<T>& conic, const Vec2<T>& mu, T x0, T x1, T y0,
                                 T y1) {
  if (mu[0] >= x0 && mu[0] <= x1 && mu[1] >= y0 && mu[1] <= y1) return T(0);
  const T a = conic(0, 0), b = conic(0, 1), c = conic(1, 1);
  const auto q = [&](T dx, T dy) { return a * dx * dx + T(2) * b * dx * dy + c * dy * dy; };
  T best = std::numeric_limits<T>::max();
  for (const T x : {x0, x1}) {
    const T dx = x - mu[0];
    const T y = std::clamp(mu[1] - b * dx / c, y0, y1);
    best = std::min(best, q(dx, y - mu[1]));
  }
  for (const T y : {y0, y1}) {
    const T dy = y - mu[1];
    const T x = std::clamp(mu[0] - b * dy / a, x0, x1);
    best = std::min(best, q(x - mu[0], dy));
  }
  return best;
}

// Tiles whose pixel rectangle intersects the beta-scaled minimum-alpha
// ellipse. Gaussians at or below tau_alpha opacity bin nowhere.
template <typename T>
inline std::vector<int> bin_compact(const ProjectedGaussian<T>& pg, const TileGrid& grid, T beta,
                                    T tau_alpha) {
  std::vector<int> out;
  if (pg.opacity <= tau_alpha) return out;
  const T det = pg.cov2d.determinant();
  require(det > T(0) && pg.cov2d(0, 0) > T(0), "bin_compact: cov2d must be positive definite");
  const T a_star = std::min(compact_threshold(pg.opacity, tau_alpha, beta), T(kBinMahaMax));

  // Candidate tiles from the ellipse's axis-aligned extent.
  const T ext_x = std::sqrt(a_star * pg.cov2d(0, 0));
  const T ext_y = std::sqrt(a_star * pg.cov2d(1, 1));
  const int ts = grid.tile_size;
  const int tx0 = std::max(0, static_cast<int>(std::floor((pg.mu2d[0] - ext_x) / ts)));
  const int tx1 =
      std::min(grid.tiles_x - 1, static_cast<int>(std::floor((pg.mu2d[0] + ext_x) / ts)));
  const int ty0 = std::max(0, static_cast<int>(std::floor((pg.mu2d[1] - ext_y) / ts)));
  const int ty1 =
      std::min(grid.tiles_y - 1, static_cast<int>(std::floor((pg.mu2d[1] + ext_y) / ts)));

  for (int ty = ty0; ty <= ty1; ++ty) {
    const T y0 = T(ty * ts);
    const T y1 = T(std::min((ty + 1) * ts, grid.height) - 1);
    for (int tx = tx0; tx <= tx1; ++tx) {
      const T x0 = T(tx * ts);
      const T x1 = T(std::min((tx + 1) * ts, grid.width) - 1);
      if (min_mahalanobis_on_rect(pg.cov2d_inv, pg.mu2d, x0, x1, y0, y1) <= a_star)
        out.push_back(ty * grid.tiles_x + tx);
    }
  }
  return out;
}

// Depth order over projected Gaussians: ascending camera-space z, ties
// broken by index so renders are deterministic.
template <typename T>
inline std::vector<int> depth_order(const std::vector<ProjectedGaussian<T>>& pgs) {
  std::vector<int> order(pgs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (pgs[a].depth != pgs[b].depth) return pgs[a].depth < pgs[b].depth;
    return a < b;
  });
  return order;
}

template <typename T>
inline TileGrid build_tile_grid(const std::vector<ProjectedGaussian<T>>& pgs, int width,
                                int height, const BinningConfig<T>& binning, int tile_size = 16) {
  TileGrid grid = make_tile_grid(width, height, tile_size);
  for (const int idx : depth_order(pgs)) {
    const std::vector<int> tiles = binning.mode == BinMode::kAabb
                                       ? bin_aabb(pgs[idx], grid)
                                       : bin_compact(pgs[idx], grid, binning.beta,
                                                     binning.tau_alpha);
    for (const int t : tiles) grid.tiles[t].push_back(idx);
  }
  return grid;
}

inline std::int64_t count_pairs(const TileGrid& grid) {
  std::int64_t total = 0;
  for (const auto& t : grid.tiles) total += static_cast<std::int64_t>(t.size());
  return total;
}

template <typename T>
struct RenderOutputs {
  Image<T> image;
  ScalarMap<T> transmittance;
  Eigen::ArrayXXi contrib_count;
};

// Per-source-Gaussian count of masked pixels the Gaussian contributed to
// (alpha over the cutoff, reached before termination) in one view.
struct FootprintCounter {
  std::vector<int> counts;
  explicit FootprintCounter(int n_gaussians = 0) : counts(n_gaussians, 0) {}
};

// Front-to-back alpha blending over the tile grid. When a mask and counter
// are given, every contribution landing on a masked pixel increments the
// counter of its source Gaussian.
template <typename T>
inline RenderOutputs<T> blend_forward(const TileGrid& grid,
                                      const std::vector<ProjectedGaussian<T>>& pgs,
                                      const MaskMap* mask = nullptr,
                                      FootprintCounter* counter = nullptr, int workers = 1) {
  RenderOutputs<T> out;
  out.image = Image<T>(grid.width, grid.height);
  out.transmittance = ScalarMap<T>::Ones(grid.height, grid.width);
  out.contrib_count = Eigen::ArrayXXi::Zero(grid.height, grid.width);

  const int n_workers = std::max(1, workers);
  std::vector<std::vector<int>> worker_counts;
  if (counter) worker_counts.assign(n_workers, std::vector<int>(counter->counts.size(), 0));

  parallel_chunks(grid.tile_count(), n_workers, [&](int worker, int begin, int end) {
    std::vector<int>* local_counts = counter ? &worker_counts[worker] : nullptr;
    for (int tile = begin; tile < end; ++tile) {
      const auto& list = grid.tiles[tile];
      const int tx = tile % grid.tiles_x;
      const int ty = tile / grid.tiles_x;
      const int px1 = std::min((tx + 1) * grid.tile_size, grid.width);
      const int py1 = std::min((ty + 1) * grid.tile_size, grid.height);
      for (int py = ty * grid.tile_size; py < py1; ++py) {
        for (int px = tx * grid.tile_size; px < px1; ++px) {
          T trans = T(1);
          Vec3<T> c = Vec3<T>::Zero();
          int n = 0;
          const bool masked = mask && (*mask)(py, px) != 0;
          for (const int idx : list) {
            const ProjectedGaussian<T>& pg = pgs[idx];
            const T dx = T(px) - pg.mu2d[0];
            const T dy = T(py) - pg.mu2d[1];
            const T q = pg.cov2d_inv(0, 0) * dx * dx +
                        T(2) * pg.cov2d_inv(0, 1) * dx * dy + pg.cov2d_inv(1, 1) * dy * dy;
            if (q < T(0)) continue;
            const T alpha = std::min(T(kAlphaCap), pg.opacity * std::exp(T(-0.5) * q));
            if (alpha < T(kAlphaMin)) continue;
            c += trans * alpha * pg.color;
            ++n;
            if (masked && local_counts) ++(*local_counts)[pg.source_index];
            trans *= T(1) - alpha;
            if (trans < T(kTransmitMin)) break;
          }
          out.image.at(px, py) = c;
          out.transmittance(py, px) = trans;
          out.contrib_count(py, px) = n;
        }
      }
    }
  });

  if (counter)
    for (const auto& wc : worker_counts)
      for (size_t i = 0; i < wc.size(); ++i) counter->counts[i] += wc[i];
  return out;
}

template <typename T>
struct BlendGrads {
  std::vector<Vec2<T>> d_mu2d;
  std::vector<Mat2<T>> d_conic;  // gradient on cov2d_inv, full-matrix convention
  std::vector<Vec3<T>> d_color;
  std::vector<T> d_opacity;  // gradient on the activated opacity
  // Per-pixel |d mu2d| summed componentwise; basis of the split criterion.
  std::vector<Vec2<T>> abs_grad;

  explicit BlendGrads(size_t n = 0)
      : d_mu2d(n, Vec2<T>::Zero()),
        d_conic(n, Mat2<T>::Zero()),
        d_color(n, Vec3<T>::Zero()),
        d_opacity(n, T(0)),
        abs_grad(n, Vec2<T>::Zero()) {}

  void add(const BlendGrads<T>& other) {
    for (size_t i = 0; i < d_mu2d.size(); ++i) {
      d_mu2d[i] += other.d_mu2d[i];
      d_conic[i] += other.d_conic[i];
      d_color[i] += other.d_color[i];
      d_opacity[i] += other.d_opacity[i];
      abs_grad[i] += other.abs_grad[i];
    }
  }
};

// Adjoint of blend_forward under identical cutoffs. Each pixel replays its
// forward contribution sequence, then walks it in reverse with a suffix
// accumulator for the transmittance product terms.
template <typename T>
inline BlendGrads<T> blend_backward(const TileGrid& grid,
                                    const std::vector<ProjectedGaussian<T>>& pgs,
                                    const Image<T>& d_image, int workers = 1) {
  const int n_workers = std::max(1, workers);
  std::vector<BlendGrads<T>> worker_grads(n_workers, BlendGrads<T>(pgs.size()));

  struct Entry {
    int idx;
    T alpha, dx, dy, q, t_before;
    bool capped;
  };

  parallel_chunks(grid.tile_count(), n_workers, [&](int worker, int begin, int end) {
    BlendGrads<T>& acc = worker_grads[worker];
    std::vector<Entry> entries;
    for (int tile = begin; tile < end; ++tile) {
      const auto& list = grid.tiles[tile];
      if (list.empty()) continue;
      const int tx = tile % grid.tiles_x;
      const int ty = tile / grid.tiles_x;
      const int px1 = std::min((tx + 1) * grid.tile_size, grid.width);
      const int py1 = std::min((ty + 1) * grid.tile_size, grid.height);
      for (int py = ty * grid.tile_size; py < py1; ++py) {
        for (int px = tx * grid.tile_size; px < px1; ++px) {
          entries.clear();
          T trans = T(1);
          for (const int idx : list) {
            const ProjectedGaussian<T>& pg = pgs[idx];
            const T dx = T(px) - pg.mu2d[0];
            const T dy = T(py) - pg.mu2d[1];
            const T q = pg.cov2d_inv(0, 0) * dx * dx +
                        T(2) * pg.cov2d_inv(0, 1) * dx * dy + pg.cov2d_inv(1, 1) * dy * dy;
            if (q < T(0)) continue;
            const T raw = pg.opacity * std::exp(T(-0.5) * q);
            const bool capped = raw > T(kAlphaCap);
            const T alpha = capped ? T(kAlphaCap) : raw;
            if (alpha < T(kAlphaMin)) continue;
            entries.push_back({idx, alpha, dx, dy, q, trans, capped});
            trans *= T(1) - alpha;
            if (trans < T(kTransmitMin)) break;
          }
          if (entries.empty()) continue;

          const Vec3<T> dc = d_image.at(px, py);
          // suffix = sum over later entries of T_k alpha_k (c_k . dc)
          T suffix = T(0);
          for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
            const ProjectedGaussian<T>& pg = pgs[it->idx];
            const T w = pg.color.dot(dc);
            const T d_alpha = it->t_before * w - suffix / (T(1) - it->alpha);
            suffix += it->t_before * it->alpha * w;
            acc.d_color[it->idx] += it->t_before * it->alpha * dc;
            if (it->capped) continue;  // the min() cap zeroes d alpha/d (sigma, q)
            const T g = std::exp(T(-0.5) * it->q);
            acc.d_opacity[it->idx] += g * d_alpha;
            const T d_q = T(-0.5) * it->alpha * d_alpha;
            const T dx = it->dx, dy = it->dy;
            Mat2<T> outer;
            outer << dx * dx, dx * dy, dx * dy, dy * dy;
            acc.d_conic[it->idx] += d_q * outer;
            const Vec2<T> d_vec(pg.cov2d_inv(0, 0) * dx + pg.cov2d_inv(0, 1) * dy,
                                pg.cov2d_inv(1, 0) * dx + pg.cov2d_inv(1, 1) * dy);
            const Vec2<T> d_mu = T(-2) * d_q * d_vec;
            acc.d_mu2d[it->idx] += d_mu;
            acc.abs_grad[it->idx] += d_mu.cwiseAbs();
          }
        }
      }
    }
  });

  BlendGrads<T> total(pgs.size());
  for (const auto& wg : worker_grads) total.add(wg);
  return total;
}

}  // namespace splat
