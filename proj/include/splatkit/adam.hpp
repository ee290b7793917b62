// Copyright Contributors to the splatkit project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "splatkit/adc.hpp"
#include "splatkit/camera.hpp"
#include "splatkit/scene.hpp"
#include "splatkit/types.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace splat {

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-15;

// Log-linear learning-rate decay over the run, the convention used for
// the position group.
template <typename T>
inline T expon_lr(T lr_init, T lr_final, int step, int max_steps) {
  const T t = std::clamp(T(step) / T(std::max(1, max_steps)), T(0), T(1));
  return std::exp((T(1) - t) * std::log(lr_init) + t * std::log(lr_final));
}

// One Adam moment store for a parameter group of `dim` scalars per
// Gaussian, with its own step counter for bias correction.
template <typename T>
struct AdamGroup {
  int dim = 1;
  std::vector<T> m, v;
  std::int64_t t = 0;

  void init(int n, int d) {
    dim = d;
    m.assign(static_cast<size_t>(n) * d, T(0));
    v.assign(static_cast<size_t>(n) * d, T(0));
    t = 0;
  }

  // Survivors keep their moments; new entries start at zero. The step
  // counter is shared by the group, as in the reference pipeline.
  void remap(const IndexRemap& r) {
    std::vector<T> nm(static_cast<size_t>(r.new_size) * dim, T(0));
    std::vector<T> nv(static_cast<size_t>(r.new_size) * dim, T(0));
    for (size_t i = 0; i < r.old_to_new.size(); ++i) {
      const int j = r.old_to_new[i];
      if (j < 0) continue;
      for (int d = 0; d < dim; ++d) {
        nm[static_cast<size_t>(j) * dim + d] = m[i * dim + d];
        nv[static_cast<size_t>(j) * dim + d] = v[i * dim + d];
      }
    }
    m = std::move(nm);
    v = std::move(nv);
  }

  // Updates `count` scalars addressed through strided accessors.
  template <typename ParamAt, typename GradAt>
  void step(T lr, int n, ParamAt param_at, GradAt grad_at) {
    ++t;
    const T bc1 = T(1) - std::pow(T(kAdamBeta1), T(t));
    const T bc2 = T(1) - std::pow(T(kAdamBeta2), T(t));
    for (int i = 0; i < n; ++i)
      for (int d = 0; d < dim; ++d) {
        const size_t s = static_cast<size_t>(i) * dim + d;
        const T g = grad_at(i, d);
        m[s] = T(kAdamBeta1) * m[s] + (T(1) - T(kAdamBeta1)) * g;
        v[s] = T(kAdamBeta2) * v[s] + (T(1) - T(kAdamBeta2)) * g * g;
        param_at(i, d) -= lr * (m[s] / bc1) / (std::sqrt(v[s] / bc2) + T(kAdamEps));
      }
  }
};

template <typename T>
struct LearningRates {
  T position = T(1.6e-4);  // multiplied by scene extent, exponentially decayed
  T position_final = T(1.6e-6);
  T sh_dc = T(2.5e-3);
  T sh_rest = T(2.5e-3 / 20);
  T opacity = T(5e-2);
  T scale = T(5e-3);
  T rotation = T(1e-3);
};

// Per-Gaussian parameter gradients for a whole scene, scene-index aligned.
template <typename T>
struct SceneGrads {
  std::vector<GaussianGrads<T>> per_gaussian;

  void init(const Scene<T>& scene) {
    per_gaussian.assign(scene.size(), GaussianGrads<T>{});
    for (auto& g : per_gaussian) g.sh = ShMatrix<T>::Zero(sh_coeff_count(scene.sh_degree), 3);
  }
};

template <typename T>
class SceneOptimizer {
 public:
  void init(const Scene<T>& scene) {
    const int n = scene.size();
    n_sh_ = sh_coeff_count(scene.sh_degree);
    pos_.init(n, 3);
    rot_.init(n, 4);
    scale_.init(n, 3);
    opacity_.init(n, 1);
    sh_dc_.init(n, 3);
    sh_rest_.init(n, 3 * std::max(0, n_sh_ - 1));
  }

  void remap(const IndexRemap& r) {
    pos_.remap(r);
    rot_.remap(r);
    scale_.remap(r);
    opacity_.remap(r);
    sh_dc_.remap(r);
    sh_rest_.remap(r);
  }

  // position_lr is the already-decayed, extent-scaled rate for this step.
  // update_sh_rest gates the lazily scheduled SH-rest group.
  void step(Scene<T>& scene, const SceneGrads<T>& grads, const LearningRates<T>& lrs,
            T position_lr, bool update_sh_rest = true) {
    const int n = scene.size();
    auto& gs = scene.gaussians;
    const auto& pg = grads.per_gaussian;
    pos_.step(position_lr, n, [&](int i, int d) -> T& { return gs[i].mu[d]; },
              [&](int i, int d) { return pg[i].mu[d]; });
    rot_.step(lrs.rotation, n, [&](int i, int d) -> T& { return gs[i].rot[d]; },
              [&](int i, int d) { return pg[i].rot[d]; });
    scale_.step(lrs.scale, n, [&](int i, int d) -> T& { return gs[i].log_scale[d]; },
                [&](int i, int d) { return pg[i].log_scale[d]; });
    opacity_.step(lrs.opacity, n, [&](int i, int) -> T& { return gs[i].opacity_logit; },
                  [&](int i, int) { return pg[i].opacity_logit; });
    sh_dc_.step(lrs.sh_dc, n, [&](int i, int d) -> T& { return gs[i].sh(0, d); },
                [&](int i, int d) { return pg[i].sh(0, d); });
    if (update_sh_rest && n_sh_ > 1)
      sh_rest_.step(lrs.sh_rest, n,
                    [&](int i, int d) -> T& { return gs[i].sh(1 + d / 3, d % 3); },
                    [&](int i, int d) { return pg[i].sh(1 + d / 3, d % 3); });
  }

  // Applies an SH-rest-only step from externally accumulated gradients.
  void step_sh_rest(Scene<T>& scene, const std::vector<ShMatrix<T>>& rest_grads,
                    const LearningRates<T>& lrs) {
    if (n_sh_ <= 1) return;
    sh_rest_.step(lrs.sh_rest, scene.size(),
                  [&](int i, int d) -> T& { return scene.gaussians[i].sh(1 + d / 3, d % 3); },
                  [&](int i, int d) { return rest_grads[i](1 + d / 3, d % 3); });
  }

  // Vanilla-style opacity reset support: the moments of the opacity group
  // are cleared so the optimizer does not immediately undo the reset.
  void reset_opacity_state() {
    std::fill(opacity_.m.begin(), opacity_.m.end(), T(0));
    std::fill(opacity_.v.begin(), opacity_.v.end(), T(0));
  }

 private:
  int n_sh_ = 16;
  AdamGroup<T> pos_, rot_, scale_, opacity_, sh_dc_, sh_rest_;
};

}  // namespace splat
