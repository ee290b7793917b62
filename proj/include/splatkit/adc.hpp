// Copyright Contributors to the splatkit project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "splatkit/camera.hpp"
#include "splatkit/error_maps.hpp"
#include "splatkit/raster.hpp"
#include "splatkit/rng.hpp"
#include "splatkit/scene.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

namespace splat {

// Per-Gaussian statistics driving densification and pruning. Gradient
// accumulators are filled by the training loop every iteration; the
// multi-view scores are rebuilt at each density-control event. Everything
// resets after an event.
template <typename T>
struct ScoreTable {
  std::vector<T> s_d;        // mean high-error footprint pixels across sampled views
  std::vector<T> s_p_raw;    // footprint counts weighted by per-view photometric loss
  std::vector<T> s_p;        // min-max normalized s_p_raw
  std::vector<T> grad_norm_acc;  // ||d mu2d|| in NDC units, summed over renders
  std::vector<T> abs_grad_acc;   // per-pixel |d mu2d| in NDC units, summed over renders
  std::vector<Vec3<T>> grad3d_acc;  // world-space positional gradient, for clone offsets
  std::vector<int> views_seen;      // renders in which the Gaussian was not culled
  std::vector<T> max_radius2d;      // largest projected 3-sigma radius seen, pixels

  void reset(int n) {
    s_d.assign(n, T(0));
    s_p_raw.assign(n, T(0));
    s_p.assign(n, T(0));
    grad_norm_acc.assign(n, T(0));
    abs_grad_acc.assign(n, T(0));
    grad3d_acc.assign(n, Vec3<T>::Zero());
    views_seen.assign(n, 0);
    max_radius2d.assign(n, T(0));
  }

  int size() const { return static_cast<int>(s_d.size()); }
};

template <typename T>
inline std::vector<T> minmax_normalize(const std::vector<T>& v) {
  if (v.empty()) return {};
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const T lo = *lo_it, hi = *hi_it;
  std::vector<T> out(v.size(), T(0));
  if (hi > lo)
    for (size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - lo) / (hi - lo);
  return out;
}

template <typename T>
struct ViewRef {
  const Camera<T>* camera = nullptr;
  const Image<T>* image = nullptr;
};

// Score arithmetic over per-view footprint counts: s_d is the mean count
// across the sampled views; s_p_raw weights each view's count by that
// view's photometric loss and is then min-max normalized over the
// population.
template <typename T>
inline void scores_from_counts(const std::vector<std::vector<int>>& counts,
                               const std::vector<T>& photometric, ScoreTable<T>& table) {
  require(!counts.empty() && counts.size() == photometric.size(),
          "scores_from_counts: need one count row and one photometric value per view");
  const int k = static_cast<int>(counts.size());
  const int n = static_cast<int>(counts[0].size());
  table.s_d.assign(n, T(0));
  table.s_p_raw.assign(n, T(0));
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < n; ++i) {
      table.s_d[i] += T(counts[j][i]);
      table.s_p_raw[i] += T(counts[j][i]) * photometric[j];
    }
  for (int i = 0; i < n; ++i) table.s_d[i] /= T(k);
  table.s_p = minmax_normalize(table.s_p_raw);
}

// Renders each sampled view, thresholds its normalized error map, and
// counts per Gaussian how many high-error pixels its footprint actually
// contributed to. s_d averages the counts over the sampled views; s_p
// weights them by each view's photometric loss before normalizing.
template <typename T>
inline void accumulate_scores(const Scene<T>& scene, const std::vector<ViewRef<T>>& views, T tau,
                              T lambda, const BinningConfig<T>& binning, int tile_size,
                              ScoreTable<T>& table, int workers = 1) {
  require(!views.empty(), "accumulate_scores: no training views");
  const int n = scene.size();
  const int k = static_cast<int>(views.size());

  std::vector<std::vector<int>> counts(k);
  std::vector<T> photometric(k, T(0));
  parallel_chunks(k, workers, [&](int /*worker*/, int begin, int end) {
    for (int j = begin; j < end; ++j) {
      const Camera<T>& cam = *views[j].camera;
      const auto pgs = project_scene(scene, cam);
      const TileGrid grid = build_tile_grid(pgs, cam.width, cam.height, binning, tile_size);
      const RenderOutputs<T> rendered = blend_forward(grid, pgs);
      const ErrorMaps<T> maps = build_error_maps(rendered.image, *views[j].image, tau, lambda);
      FootprintCounter counter(n);
      blend_forward(grid, pgs, &maps.mask, &counter);
      counts[j] = std::move(counter.counts);
      photometric[j] = maps.photometric;
    }
  });

  scores_from_counts(counts, photometric, table);
}

template <typename T>
struct DensifyParams {
  T tau_d = T(5);
  T grad_threshold = T(2e-4);
  T percent_dense = T(0.01);
  bool use_vcd = true;
};

struct DensifySelection {
  std::vector<int> clone;
  std::vector<int> split;
};

// Clone small Gaussians whose mean positional gradient is large; split
// large ones by the absolute-gradient criterion. With VCD active a
// candidate must additionally sit on more than tau_d high-error pixels
// per sampled view, so the selection is a subset of the gradient-only one.
template <typename T>
inline DensifySelection select_densify(const ScoreTable<T>& table, const Scene<T>& scene,
                                       const DensifyParams<T>& params, T scene_extent) {
  DensifySelection sel;
  for (int i = 0; i < scene.size(); ++i) {
    if (table.views_seen[i] == 0) continue;
    if (params.use_vcd && !(table.s_d[i] > params.tau_d)) continue;
    const T inv_seen = T(1) / T(table.views_seen[i]);
    const T mean_grad = table.grad_norm_acc[i] * inv_seen;
    const T mean_abs_grad = table.abs_grad_acc[i] * inv_seen;
    const bool small =
        scene.gaussians[i].scale().maxCoeff() <= params.percent_dense * scene_extent;
    if (small) {
      if (mean_grad >= params.grad_threshold) sel.clone.push_back(i);
    } else {
      if (mean_abs_grad >= params.grad_threshold) sel.split.push_back(i);
    }
  }
  return sel;
}

// Maps pre-event Gaussian indices to post-event ones (-1: removed).
struct IndexRemap {
  std::vector<int> old_to_new;
  int new_size = 0;
};

inline constexpr double kSplitScaleShrink = 1.6;

// Clones duplicate their parent offset by one positional-gradient step;
// splits replace the parent with two children sampled from the parent's
// own distribution at 1/1.6 scale.
template <typename T>
inline IndexRemap apply_densify(Scene<T>& scene, const std::vector<int>& clone,
                                const std::vector<int>& split, const ScoreTable<T>& table,
                                T clone_step_lr, Rng& rng) {
  const int n = scene.size();
  IndexRemap remap;
  remap.old_to_new.assign(n, -1);

  std::vector<bool> is_split(n, false);
  for (const int i : split) is_split[i] = true;

  std::vector<Gaussian3D<T>> next;
  next.reserve(n + clone.size() + 2 * split.size());
  for (int i = 0; i < n; ++i) {
    if (is_split[i]) continue;
    remap.old_to_new[i] = static_cast<int>(next.size());
    next.push_back(scene.gaussians[i]);
  }
  for (const int i : clone) {
    Gaussian3D<T> g = scene.gaussians[i];
    if (table.views_seen[i] > 0)
      g.mu -= clone_step_lr * (table.grad3d_acc[i] / T(table.views_seen[i]));
    next.push_back(std::move(g));
  }
  for (const int i : split) {
    const Gaussian3D<T>& parent = scene.gaussians[i];
    const Mat3<T> rot = quat_to_rotation(parent.rot);
    const Vec3<T> scale = parent.scale();
    for (int c = 0; c < 2; ++c) {
      Gaussian3D<T> child = parent;
      const Vec3<T> eps(T(rng.normal()), T(rng.normal()), T(rng.normal()));
      child.mu = parent.mu + rot * (eps.array() * scale.array()).matrix();
      child.log_scale = parent.log_scale.array() - T(std::log(kSplitScaleShrink));
      next.push_back(std::move(child));
    }
  }
  scene.gaussians = std::move(next);
  remap.new_size = scene.size();
  return remap;
}

template <typename T>
struct PruneParams {
  T tau_p = T(0.9);
  T min_opacity = T(0.005);    // vanilla low-opacity cutoff (early phase)
  T opacity_late = T(0.1);     // opacity cutoff once densification has ended
  T world_size_frac = T(0.1);  // of scene extent
  T screen_size = T(20);       // projected radius bound, pixels
  int size_prune_from = 3000;  // iteration from which oversize pruning applies
  int densify_until = 15000;
  bool use_vcp = true;
};

// Early phase: vanilla candidates (low opacity or oversized), of which VCP
// prunes only the half with the highest pruning score. Late phase: prune
// anything nearly transparent or with a pruning score above tau_p.
// Never empties the scene: the lowest-scoring Gaussian survives.
template <typename T>
inline std::vector<int> select_prune(const ScoreTable<T>& table, const Scene<T>& scene,
                                     int iteration, const PruneParams<T>& params,
                                     T scene_extent) {
  const int n = scene.size();
  std::vector<int> pruned;
  if (iteration < params.densify_until) {
    std::vector<int> candidates;
    for (int i = 0; i < n; ++i) {
      const Gaussian3D<T>& g = scene.gaussians[i];
      bool cand = g.opacity() < params.min_opacity;
      if (iteration > params.size_prune_from) {
        cand = cand || g.scale().maxCoeff() > params.world_size_frac * scene_extent;
        cand = cand || table.max_radius2d[i] > params.screen_size;
      }
      if (cand) candidates.push_back(i);
    }
    if (!params.use_vcp) {
      pruned = std::move(candidates);
    } else {
      std::sort(candidates.begin(), candidates.end(), [&](int a, int b) {
        if (table.s_p[a] != table.s_p[b]) return table.s_p[a] > table.s_p[b];
        return a < b;
      });
      const int take = (static_cast<int>(candidates.size()) + 1) / 2;
      pruned.assign(candidates.begin(), candidates.begin() + take);
      std::sort(pruned.begin(), pruned.end());
    }
  } else {
    // The raised opacity cutoff and the score rule are both part of the
    // late-phase multi-view pruning; without it only the vanilla
    // min-opacity rule applies.
    const T opacity_cut = params.use_vcp ? params.opacity_late : params.min_opacity;
    for (int i = 0; i < n; ++i) {
      const bool low = scene.gaussians[i].opacity() < opacity_cut;
      const bool scored = params.use_vcp && table.s_p[i] > params.tau_p;
      if (low || scored) pruned.push_back(i);
    }
  }

  if (static_cast<int>(pruned.size()) == n && n > 0) {
    int keep = 0;
    for (int i = 1; i < n; ++i)
      if (table.s_p[i] < table.s_p[keep]) keep = i;
    pruned.erase(std::find(pruned.begin(), pruned.end(), keep));
  }
  return pruned;
}

template <typename T>
inline IndexRemap apply_prune(Scene<T>& scene, const std::vector<int>& prune) {
  const int n = scene.size();
  std::vector<bool> drop(n, false);
  for (const int i : prune) drop[i] = true;
  IndexRemap remap;
  remap.old_to_new.assign(n, -1);
  std::vector<Gaussian3D<T>> next;
  next.reserve(n - prune.size());
  for (int i = 0; i < n; ++i) {
    if (drop[i]) continue;
    remap.old_to_new[i] = static_cast<int>(next.size());
    next.push_back(std::move(scene.gaussians[i]));
  }
  scene.gaussians = std::move(next);
  remap.new_size = scene.size();
  return remap;
}

}  // namespace splat
