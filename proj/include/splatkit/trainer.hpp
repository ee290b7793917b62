// Copyright Contributors to the splatkit project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "splatkit/adam.hpp"
#include "splatkit/adc.hpp"
#include "splatkit/config.hpp"
#include "splatkit/dataset.hpp"
#include "splatkit/loss.hpp"
#include "splatkit/metrics.hpp"
#include "splatkit/raster.hpp"
#include "splatkit/rng.hpp"

#include <chrono>
#include <cstdint>
#include <functional>
#include <vector>

namespace splat {

struct LogRow {
  int iteration = 0;
  double loss = 0;
  double psnr = 0;
  int gaussians = 0;
  std::int64_t tile_pairs = 0;
  double elapsed_ms = 0;
};

struct TrainCallbacks {
  std::function<void(int)> on_densify_event;
  std::function<void(int)> on_prune_event;
  std::function<void(int)> on_iteration;
};

template <typename T>
struct TrainResult {
  Scene<T> scene;
  std::vector<LogRow> log;
};

// Event cadence: densification every densify_every iterations inside
// [densify_from, densify_until]; pruning on the early cadence over the
// same window and on the late cadence afterwards.
inline bool densify_due(int iteration, const TrainConfig& cfg) {
  return iteration >= cfg.densify_from && iteration <= cfg.densify_until &&
         iteration % cfg.densify_every == 0;
}

inline bool prune_due(int iteration, const TrainConfig& cfg) {
  if (iteration >= cfg.densify_from && iteration <= cfg.densify_until)
    return iteration % cfg.prune_every_early == 0;
  if (iteration > cfg.densify_until)
    return (iteration - cfg.densify_until) % cfg.prune_every_late == 0;
  return false;
}

// Lazily scheduled groups update every iteration before 15K, then every
// lazy_opt_interval_15k iterations until 20K, then every
// lazy_opt_interval_20k.
inline bool lazy_update_due(int iteration, const TrainConfig& cfg) {
  if (!cfg.lazy_opt_enabled || iteration < 15000) return true;
  if (iteration < 20000) return iteration % cfg.lazy_opt_interval_15k == 0;
  return iteration % cfg.lazy_opt_interval_20k == 0;
}

template <typename T>
class Trainer {
 public:
  Trainer(Scene<T> scene, const Dataset<T>& data, const TrainConfig& cfg)
      : scene_(std::move(scene)), data_(data), cfg_(cfg), rng_(cfg.seed) {
    cfg_.validate();
    require(!data.cameras.empty(), "trainer: dataset has no views");
    require(!data.train_indices.empty(), "trainer: dataset has no training views");
    binning_.mode = cfg_.bin_mode == "compact" ? BinMode::kCompact : BinMode::kAabb;
    binning_.beta = T(cfg_.beta);
    binning_.tau_alpha = T(cfg_.tau_alpha);
    lrs_.position = T(cfg_.lr_position);
    lrs_.position_final = T(cfg_.lr_position_final);
    lrs_.sh_dc = T(cfg_.lr_sh_dc);
    lrs_.sh_rest = T(cfg_.lr_sh_rest);
    lrs_.opacity = T(cfg_.lr_opacity);
    lrs_.scale = T(cfg_.lr_scale);
    lrs_.rotation = T(cfg_.lr_rotation);
    optimizer_.init(scene_);
    table_.reset(scene_.size());
  }

  TrainResult<T> run(const TrainCallbacks& callbacks = {}) {
    TrainResult<T> result;
    result.log.reserve(cfg_.iterations);
    const auto start = std::chrono::steady_clock::now();

    for (int it = 1; it <= cfg_.iterations; ++it) {
      LogRow row;
      row.iteration = it;
      if (!cfg_.schedule_dry_run) row = train_iteration(it);

      const bool densify = densify_due(it, cfg_);
      const bool prune = prune_due(it, cfg_);
      if (densify && callbacks.on_densify_event) callbacks.on_densify_event(it);
      if (prune && callbacks.on_prune_event) callbacks.on_prune_event(it);
      if (!cfg_.schedule_dry_run && (densify || prune)) density_event(it, densify, prune);

      if (!cfg_.schedule_dry_run && cfg_.opacity_reset_every > 0 &&
          it % cfg_.opacity_reset_every == 0)
        reset_opacity();

      row.iteration = it;
      row.gaussians = scene_.size();
      row.elapsed_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
              .count();
      result.log.push_back(row);
      if (callbacks.on_iteration) callbacks.on_iteration(it);
    }
    result.scene = scene_;
    return result;
  }

  const Scene<T>& scene() const { return scene_; }

 private:
  LogRow train_iteration(int it) {
    LogRow row;
    const int view = data_.train_indices[static_cast<size_t>(
        rng_.bounded(static_cast<std::uint64_t>(data_.train_indices.size())))];
    const Camera<T>& cam = data_.cameras[view];
    const Image<T>& gt = data_.images[view];

    const auto pgs = project_scene(scene_, cam);
    const TileGrid grid = build_tile_grid(pgs, cam.width, cam.height, binning_, cfg_.tile_size);
    const RenderOutputs<T> rendered = blend_forward(grid, pgs, nullptr, nullptr, cfg_.workers);
    const LossResult<T> loss = training_loss(rendered.image, gt, T(cfg_.lambda));
    const BlendGrads<T> bg = blend_backward(grid, pgs, loss.d_image, cfg_.workers);

    SceneGrads<T> grads;
    grads.init(scene_);
    const T ndc_x = T(cam.width) / T(2);
    const T ndc_y = T(cam.height) / T(2);
    for (size_t p = 0; p < pgs.size(); ++p) {
      const ProjectedGaussian<T>& pg = pgs[p];
      const Mat2<T> d_cov2d = cov_grad_from_inv_grad(pg.cov2d_inv, bg.d_conic[p]);
      const int src = pg.source_index;
      grads.per_gaussian[src] = project_backward(scene_.gaussians[src], cam, scene_.sh_degree,
                                                 bg.d_mu2d[p], d_cov2d, bg.d_color[p],
                                                 bg.d_opacity[p]);
      // density-control statistics, in NDC units as in the reference ADC
      const Vec2<T> g_ndc(bg.d_mu2d[p][0] * ndc_x, bg.d_mu2d[p][1] * ndc_y);
      table_.grad_norm_acc[src] += g_ndc.norm();
      table_.abs_grad_acc[src] += bg.abs_grad[p][0] * ndc_x + bg.abs_grad[p][1] * ndc_y;
      table_.grad3d_acc[src] += grads.per_gaussian[src].mu;
      table_.views_seen[src] += 1;
      table_.max_radius2d[src] = std::max(
          table_.max_radius2d[src], T(kBinSigma) * std::sqrt(max_eigenvalue_2x2(pg.cov2d)));
    }

    const T pos_lr = expon_lr(T(cfg_.lr_position) * data_.extent,
                              T(cfg_.lr_position_final) * data_.extent, it, cfg_.iterations);
    if (!cfg_.lazy_opt_enabled) {
      optimizer_.step(scene_, grads, lrs_, pos_lr, true);
    } else {
      optimizer_.step(scene_, grads, lrs_, pos_lr, false);
      accumulate_rest(grads);
      if (lazy_update_due(it, cfg_)) {
        optimizer_.step_sh_rest(scene_, rest_accum_, lrs_);
        clear_rest();
      }
    }

    row.loss = static_cast<double>(loss.loss);
    row.psnr = psnr(rendered.image, gt);
    row.tile_pairs = count_pairs(grid);
    return row;
  }

  void density_event(int it, bool densify, bool prune) {
    const std::vector<int> sampled =
        rng_.sample_without_replacement(static_cast<int>(data_.train_indices.size()), cfg_.k);
    std::vector<ViewRef<T>> views;
    views.reserve(sampled.size());
    for (const int s : sampled) {
      const int v = data_.train_indices[s];
      views.push_back({&data_.cameras[v], &data_.images[v]});
    }
    accumulate_scores(scene_, views, T(cfg_.tau), T(cfg_.lambda), binning_, cfg_.tile_size,
                      table_, cfg_.workers);

    DensifySelection sel;
    if (densify) {
      DensifyParams<T> dp;
      dp.tau_d = T(cfg_.tau_d);
      dp.grad_threshold = T(cfg_.grad_threshold);
      dp.percent_dense = T(cfg_.percent_dense);
      dp.use_vcd = cfg_.vcd;
      sel = select_densify(table_, scene_, dp, data_.extent);
    }
    std::vector<int> prune_set;
    if (prune) {
      PruneParams<T> pp;
      pp.tau_p = T(cfg_.tau_p);
      pp.min_opacity = T(cfg_.prune_min_opacity);
      pp.opacity_late = T(cfg_.prune_opacity_late);
      pp.world_size_frac = T(cfg_.prune_world_size_frac);
      pp.screen_size = T(cfg_.prune_screen_size);
      pp.size_prune_from = cfg_.size_prune_from;
      pp.densify_until = cfg_.densify_until;
      pp.use_vcp = cfg_.vcp;
      prune_set = select_prune(table_, scene_, it, pp, data_.extent);
    }

    // pruned Gaussians are neither cloned nor split
    if (!prune_set.empty()) {
      std::vector<bool> dropped(scene_.size(), false);
      for (const int i : prune_set) dropped[i] = true;
      std::erase_if(sel.clone, [&](int i) { return dropped[i]; });
      std::erase_if(sel.split, [&](int i) { return dropped[i]; });
    }

    const IndexRemap prune_remap = apply_prune(scene_, prune_set);
    optimizer_.remap(prune_remap);
    for (int& i : sel.clone) i = prune_remap.old_to_new[i];
    for (int& i : sel.split) i = prune_remap.old_to_new[i];

    // remap the gradient accumulators so clone offsets survive the prune
    ScoreTable<T> mapped;
    mapped.reset(prune_remap.new_size);
    for (size_t i = 0; i < prune_remap.old_to_new.size(); ++i) {
      const int j = prune_remap.old_to_new[i];
      if (j < 0) continue;
      mapped.grad3d_acc[j] = table_.grad3d_acc[i];
      mapped.views_seen[j] = table_.views_seen[i];
    }

    const T pos_lr = expon_lr(T(cfg_.lr_position) * data_.extent,
                              T(cfg_.lr_position_final) * data_.extent, it, cfg_.iterations);
    const IndexRemap densify_remap =
        apply_densify(scene_, sel.clone, sel.split, mapped, pos_lr, rng_);
    optimizer_.remap(densify_remap);

    table_.reset(scene_.size());
    clear_rest();
  }

  void reset_opacity() {
    const T cap = logit(T(0.01));
    for (auto& g : scene_.gaussians) g.opacity_logit = std::min(g.opacity_logit, cap);
    optimizer_.reset_opacity_state();
  }

  void accumulate_rest(const SceneGrads<T>& grads) {
    if (rest_accum_.size() != static_cast<size_t>(scene_.size())) clear_rest();
    for (int i = 0; i < scene_.size(); ++i) rest_accum_[i] += grads.per_gaussian[i].sh;
  }

  void clear_rest() {
    rest_accum_.assign(scene_.size(),
                       ShMatrix<T>::Zero(sh_coeff_count(scene_.sh_degree), 3));
  }

  Scene<T> scene_;
  const Dataset<T>& data_;
  TrainConfig cfg_;
  Rng rng_;
  BinningConfig<T> binning_;
  LearningRates<T> lrs_;
  SceneOptimizer<T> optimizer_;
  ScoreTable<T> table_;
  std::vector<ShMatrix<T>> rest_accum_;
};

template <typename T>
inline TrainResult<T> run_training(Scene<T> scene, const Dataset<T>& data,
                                   const TrainConfig& cfg,
                                   const TrainCallbacks& callbacks = {}) {
  Trainer<T> trainer(std::move(scene), data, cfg);
  return trainer.run(callbacks);
}

}  // namespace splat
