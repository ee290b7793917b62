// Copyright Contributors to the splatkit project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "splatkit/types.hpp"

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <variant>

namespace splat {

// Every knob of the training pipeline. The config file format is flat
// `key = value` lines using exactly these field names; CLI flags override
// file values.
struct TrainConfig {
  int iterations = 30000;
  int k = 10;            // views sampled per density-control event
  double lambda = 0.2;   // SSIM weight in the photometric/training loss
  double tau = 0.5;      // high-error mask threshold on the normalized map
  double tau_d = 5.0;    // densification score threshold
  double tau_p = 0.9;    // pruning score threshold (late phase)
  double beta = 1.0;     // compact-box shrink factor
  double tau_alpha = 1.0 / 255;
  int densify_from = 500;
  int densify_until = 15000;
  int densify_every = 500;
  int prune_every_early = 500;
  int prune_every_late = 3000;
  double grad_threshold = 2e-4;
  double percent_dense = 0.01;
  double lr_position = 1.6e-4;  // scaled by scene extent, decayed exponentially
  double lr_position_final = 1.6e-6;
  double lr_sh_dc = 2.5e-3;
  double lr_sh_rest = 2.5e-3 / 20;
  double lr_opacity = 5e-2;
  double lr_scale = 5e-3;
  double lr_rotation = 1e-3;
  int opacity_reset_every = 0;  // 0 = off
  bool lazy_opt_enabled = false;
  int lazy_opt_interval_15k = 32;
  int lazy_opt_interval_20k = 64;
  std::uint64_t seed = 0;

  // pipeline knobs
  int tile_size = 16;
  int workers = 1;
  int sh_degree = 3;
  std::string bin_mode = "aabb";  // "aabb" or "compact"
  bool vcd = true;
  bool vcp = true;
  double prune_min_opacity = 0.005;
  double prune_opacity_late = 0.1;
  double prune_world_size_frac = 0.1;
  double prune_screen_size = 20.0;
  int size_prune_from = 3000;
  bool schedule_dry_run = false;  // fire events without doing any work

  void validate() const {
    require(iterations >= 0, "config: iterations must be >= 0");
    require(k >= 1, "config: k must be >= 1");
    require(lambda >= 0 && lambda <= 1, "config: lambda must be in [0,1]");
    require(tau > 0 && tau < 1, "config: tau must be in (0,1)");
    require(tau_d >= 0, "config: tau_d must be >= 0");
    require(tau_p >= 0 && tau_p <= 1, "config: tau_p must be in [0,1]");
    require(beta > 0 && beta <= 1, "config: beta must be in (0,1]");
    require(tau_alpha > 0 && tau_alpha < 1, "config: tau_alpha must be in (0,1)");
    require(densify_every > 0 && prune_every_early > 0 && prune_every_late > 0,
            "config: event cadences must be positive");
    require((densify_until - densify_from) % densify_every == 0,
            "config: densify_every must divide densify_until - densify_from");
    require(tile_size > 0, "config: tile_size must be positive");
    require(sh_degree >= 0 && sh_degree <= 3, "config: sh_degree must be in 0..3");
    require(bin_mode == "aabb" || bin_mode == "compact",
            "config: bin_mode must be 'aabb' or 'compact'");
  }
};

namespace detail {

using ConfigField = std::variant<int TrainConfig::*, double TrainConfig::*, bool TrainConfig::*,
                                 std::uint64_t TrainConfig::*, std::string TrainConfig::*>;

inline const std::map<std::string, ConfigField>& config_fields() {
  static const std::map<std::string, ConfigField> fields = {
      {"iterations", &TrainConfig::iterations},
      {"k", &TrainConfig::k},
      {"lambda", &TrainConfig::lambda},
      {"tau", &TrainConfig::tau},
      {"tau_d", &TrainConfig::tau_d},
      {"tau_p", &TrainConfig::tau_p},
      {"beta", &TrainConfig::beta},
      {"tau_alpha", &TrainConfig::tau_alpha},
      {"densify_from", &TrainConfig::densify_from},
      {"densify_until", &TrainConfig::densify_until},
      {"densify_every", &TrainConfig::densify_every},
      {"prune_every_early", &TrainConfig::prune_every_early},
      {"prune_every_late", &TrainConfig::prune_every_late},
      {"grad_threshold", &TrainConfig::grad_threshold},
      {"percent_dense", &TrainConfig::percent_dense},
      {"lr_position", &TrainConfig::lr_position},
      {"lr_position_final", &TrainConfig::lr_position_final},
      {"lr_sh_dc", &TrainConfig::lr_sh_dc},
      {"lr_sh_rest", &TrainConfig::lr_sh_rest},
      {"lr_opacity", &TrainConfig::lr_opacity},
      {"lr_scale", &TrainConfig::lr_scale},
      {"lr_rotation", &TrainConfig::lr_rotation},
      {"opacity_reset_every", &TrainConfig::opacity_reset_every},
      {"lazy_opt_enabled", &TrainConfig::lazy_opt_enabled},
      {"lazy_opt_interval_15k", &TrainConfig::lazy_opt_interval_15k},
      {"lazy_opt_interval_20k", &TrainConfig::lazy_opt_interval_20k},
      {"seed", &TrainConfig::seed},
      {"tile_size", &TrainConfig::tile_size},
      {"workers", &TrainConfig::workers},
      {"sh_degree", &TrainConfig::sh_degree},
      {"bin_mode", &TrainConfig::bin_mode},
      {"vcd", &TrainConfig::vcd},
      {"vcp", &TrainConfig::vcp},
      {"prune_min_opacity", &TrainConfig::prune_min_opacity},
      {"prune_opacity_late", &TrainConfig::prune_opacity_late},
      {"prune_world_size_frac", &TrainConfig::prune_world_size_frac},
      {"prune_screen_size", &TrainConfig::prune_screen_size},
      {"size_prune_from", &TrainConfig::size_prune_from},
      {"schedule_dry_run", &TrainConfig::schedule_dry_run},
  };
  return fields;
}

}  // namespace detail

inline void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
  const auto& fields = detail::config_fields();
  const auto it = fields.find(key);
  require(it != fields.end(), "config: unknown key '" + key + "'");
  std::visit(
      [&](auto member) {
        using M = std::remove_reference_t<decltype(cfg.*member)>;
        if constexpr (std::is_same_v<M, std::string>) {
          cfg.*member = value;
        } else if constexpr (std::is_same_v<M, bool>) {
          if (value == "true" || value == "1") cfg.*member = true;
          else if (value == "false" || value == "0") cfg.*member = false;
          else throw std::runtime_error("config: key '" + key + "' expects a boolean, got '" +
                                        value + "'");
        } else {
          std::istringstream in(value);
          M parsed{};
          in >> parsed;
          require(!in.fail(), "config: cannot parse value '" + value + "' for key '" + key + "'");
          cfg.*member = parsed;
        }
      },
      it->second);
}

// Flat `key = value` file; '#' starts a comment. Unknown keys are errors
// that name the offending key.
inline void load_config_file(TrainConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "config: cannot open '" + path + "'");
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      std::istringstream check(line);
      std::string token;
      require(!(check >> token), "config: malformed line " + std::to_string(line_no) +
                                     " (expected key = value)");
      continue;
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

}  // namespace splat
