// Copyright Contributors to the splatkit project
// SPDX-License-Identifier: Apache-2.0
//
// splatkit CLI: synthetic scene generation, training, rendering,
// evaluation, tile-binning benchmarks and the component ablation harness.

#include "splatkit/dataset.hpp"
#include "splatkit/metrics.hpp"
#include "splatkit/plot.hpp"
#include "splatkit/ply.hpp"
#include "splatkit/png_io.hpp"
#include "splatkit/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonFlags {
  std::string config_path;
  bool float64 = false;
  bool plot = false;
  // flag presence tracked so CLI values override config-file values
  CLI::Option* opt_seed = nullptr;
  CLI::Option* opt_workers = nullptr;
  CLI::Option* opt_beta = nullptr;
  CLI::Option* opt_tau = nullptr;
  CLI::Option* opt_tau_d = nullptr;
  CLI::Option* opt_tau_p = nullptr;
  CLI::Option* opt_iters = nullptr;
  std::uint64_t seed = 0;
  int workers = 1;
  double beta = 1.0;
  double tau = 0.5;
  double tau_d = 5.0;
  double tau_p = 0.9;
  int iters = 30000;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "flat key=value config file");
  f.opt_seed = cmd->add_option("--seed", f.seed, "RNG seed");
  f.opt_workers = cmd->add_option("--workers", f.workers, "tile-level worker threads");
  f.opt_beta = cmd->add_option("--beta", f.beta, "compact-box shrink factor");
  f.opt_tau = cmd->add_option("--tau", f.tau, "high-error mask threshold");
  f.opt_tau_d = cmd->add_option("--tau-d", f.tau_d, "densification score threshold");
  f.opt_tau_p = cmd->add_option("--tau-p", f.tau_p, "pruning score threshold");
  f.opt_iters = cmd->add_option("--iters", f.iters, "training iterations");
  cmd->add_flag("--plot", f.plot, "emit count-vs-iteration chart");
  cmd->add_flag("--float64", f.float64, "run in 64-bit floating point");
}

splat::TrainConfig build_config(const CommonFlags& f) {
  splat::TrainConfig cfg;
  if (!f.config_path.empty()) splat::load_config_file(cfg, f.config_path);
  if (f.opt_seed && f.opt_seed->count()) cfg.seed = f.seed;
  if (f.opt_workers && f.opt_workers->count()) cfg.workers = f.workers;
  if (f.opt_beta && f.opt_beta->count()) cfg.beta = f.beta;
  if (f.opt_tau && f.opt_tau->count()) cfg.tau = f.tau;
  if (f.opt_tau_d && f.opt_tau_d->count()) cfg.tau_d = f.tau_d;
  if (f.opt_tau_p && f.opt_tau_p->count()) cfg.tau_p = f.tau_p;
  if (f.opt_iters && f.opt_iters->count()) cfg.iterations = f.iters;
  cfg.validate();
  return cfg;
}

template <typename T>
splat::Image<float> to_float_image(const splat::Image<T>& img) {
  return img.template cast<float>();
}

// Renders one view of a scene and returns the image plus the tile-pair
// count of the grid that produced it.
template <typename T>
std::pair<splat::Image<T>, std::int64_t> render_view(const splat::Scene<T>& scene,
                                                     const splat::Camera<T>& cam,
                                                     const splat::BinningConfig<T>& binning,
                                                     int tile_size, int workers) {
  const auto pgs = splat::project_scene(scene, cam);
  const splat::TileGrid grid =
      splat::build_tile_grid(pgs, cam.width, cam.height, binning, tile_size);
  auto out = splat::blend_forward(grid, pgs, nullptr, nullptr, workers);
  return {std::move(out.image), splat::count_pairs(grid)};
}

// PSNR/SSIM per evaluation view plus scene-level totals. Deterministic:
// independent of wall clock and worker count is pinned by the caller.
template <typename T>
json evaluation_metrics(const splat::Scene<T>& scene, const splat::Dataset<T>& data,
                        const std::vector<int>& views, const std::string& split_name,
                        const splat::TrainConfig& cfg, const std::string& render_dir = "") {
  splat::BinningConfig<T> binning;
  binning.mode = cfg.bin_mode == "compact" ? splat::BinMode::kCompact : splat::BinMode::kAabb;
  binning.beta = T(cfg.beta);
  binning.tau_alpha = T(cfg.tau_alpha);

  json out;
  out["split"] = split_name;
  out["gaussian_count"] = scene.size();
  json view_list = json::array();
  double psnr_sum = 0, ssim_sum = 0;
  std::int64_t pair_sum = 0;
  for (const int v : views) {
    auto [img, pairs] = render_view(scene, data.cameras[v], binning, cfg.tile_size, cfg.workers);
    const double p = splat::psnr(img, data.images[v]);
    const double s = static_cast<double>(splat::ssim(img, data.images[v]));
    psnr_sum += p;
    ssim_sum += s;
    pair_sum += pairs;
    view_list.push_back({{"id", data.camera_ids[v]}, {"psnr", p}, {"ssim", s}});
    if (!render_dir.empty())
      splat::write_png((fs::path(render_dir) / splat::detail::image_name(data.camera_ids[v])).string(),
                       to_float_image(img));
  }
  out["views"] = view_list;
  out["mean_psnr"] = views.empty() ? 0.0 : psnr_sum / views.size();
  out["mean_ssim"] = views.empty() ? 0.0 : ssim_sum / views.size();
  out["total_tile_pairs"] = pair_sum;
  return out;
}

void write_log_csv(const std::string& path, const std::vector<splat::LogRow>& log) {
  std::ofstream out(path);
  splat::require(out.good(), "cannot write " + path);
  out << "iteration,loss,psnr,gaussian_count,tile_pairs,elapsed_ms\n";
  char buf[160];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%d,%lld,%.3f\n", r.iteration, r.loss, r.psnr,
                  r.gaussians, static_cast<long long>(r.tile_pairs), r.elapsed_ms);
    out << buf;
  }
}

struct TrainOutputs {
  json metrics;
  double wall_seconds = 0;
  int final_count = 0;
};

template <typename T>
TrainOutputs train_pipeline(const splat::Dataset<T>& data, const splat::TrainConfig& cfg,
                            const std::string& out_dir, bool plot) {
  fs::create_directories(out_dir);
  splat::Scene<T> scene = splat::init_from_points(data.init_points, cfg.sh_degree);

  const auto start = std::chrono::steady_clock::now();
  splat::TrainResult<T> result = splat::run_training(std::move(scene), data, cfg);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  splat::save_checkpoint(result.scene, (fs::path(out_dir) / "checkpoint.ply").string());
  write_log_csv((fs::path(out_dir) / "log.csv").string(), result.log);

  const bool have_test = !data.test_indices.empty();
  const std::vector<int>& views = have_test ? data.test_indices : data.train_indices;
  fs::create_directories(fs::path(out_dir) / "renders");
  json metrics = evaluation_metrics(result.scene, data, views, have_test ? "test" : "train", cfg,
                                    (fs::path(out_dir) / "renders").string());
  {
    std::ofstream out(fs::path(out_dir) / "metrics.json");
    out << metrics.dump(2) << "\n";
  }
  {
    // wall time lives outside metrics.json so seeded reruns stay
    // byte-identical there
    json timing;
    timing["wall_seconds"] = wall;
    std::ofstream out(fs::path(out_dir) / "timing.json");
    out << timing.dump(2) << "\n";
  }
  if (plot) {
    std::vector<double> xs, ys;
    for (const auto& r : result.log) {
      xs.push_back(r.iteration);
      ys.push_back(r.gaussians);
    }
    if (!xs.empty())
      splat::write_line_chart_png((fs::path(out_dir) / "count_vs_iteration.png").string(), xs, ys);
  }

  TrainOutputs out;
  out.metrics = std::move(metrics);
  out.wall_seconds = wall;
  out.final_count = result.scene.size();
  return out;
}

int cmd_train(const std::string& data_dir, const std::string& out_dir, const CommonFlags& flags) {
  const splat::TrainConfig cfg = build_config(flags);
  if (flags.float64) {
    const auto data = splat::load_dataset<double>(data_dir);
    train_pipeline(data, cfg, out_dir, flags.plot);
  } else {
    const auto data = splat::load_dataset<float>(data_dir);
    train_pipeline(data, cfg, out_dir, flags.plot);
  }
  std::cout << "training complete; outputs in " << out_dir << "\n";
  return 0;
}

int cmd_render(const std::string& checkpoint, const std::string& data_dir,
               const std::string& out_dir, const std::string& split, const CommonFlags& flags) {
  const splat::TrainConfig cfg = build_config(flags);
  const auto data = splat::load_dataset<float>(data_dir);
  const auto scene = splat::load_checkpoint<float>(checkpoint);
  std::vector<int> views;
  if (split == "train") views = data.train_indices;
  else if (split == "test") views = data.test_indices;
  else {
    views.resize(data.cameras.size());
    std::iota(views.begin(), views.end(), 0);
  }
  splat::require(!views.empty(), "render: selected split '" + split + "' is empty");
  fs::create_directories(out_dir);
  const json metrics = evaluation_metrics(scene, data, views, split, cfg, out_dir);
  std::ofstream out(fs::path(out_dir) / "metrics.json");
  out << metrics.dump(2) << "\n";
  std::cout << metrics.dump(2) << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_dir,
             const std::string& out_path, const CommonFlags& flags) {
  const splat::TrainConfig cfg = build_config(flags);
  const auto data = splat::load_dataset<float>(data_dir);
  const auto scene = splat::load_checkpoint<float>(checkpoint);
  splat::require(!data.test_indices.empty(), "eval: dataset has an empty test split");
  const json metrics = evaluation_metrics(scene, data, data.test_indices, "test", cfg);
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    out << metrics.dump(2) << "\n";
  }
  std::cout << metrics.dump(2) << "\n";
  return 0;
}

int cmd_bench_tiles(const std::string& data_dir, const std::string& checkpoint,
                    const std::string& betas_csv, const std::string& out_path,
                    const CommonFlags& flags) {
  const splat::TrainConfig cfg = build_config(flags);
  const auto data = splat::load_dataset<float>(data_dir);
  const std::string ckpt =
      checkpoint.empty() ? (fs::path(data_dir) / "gt_checkpoint.ply").string() : checkpoint;
  const auto scene = splat::load_checkpoint<float>(ckpt);

  std::vector<double> betas;
  {
    std::stringstream ss(betas_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) betas.push_back(std::stod(tok));
  }
  splat::require(!betas.empty(), "bench-tiles: empty beta list");

  // reference images at beta = 1 (full compact ellipse)
  const int n_views = static_cast<int>(data.cameras.size());
  std::vector<splat::Image<float>> reference(n_views);
  {
    splat::BinningConfig<float> ref;
    ref.mode = splat::BinMode::kCompact;
    ref.beta = 1.0f;
    ref.tau_alpha = static_cast<float>(cfg.tau_alpha);
    for (int v = 0; v < n_views; ++v)
      reference[v] = render_view(scene, data.cameras[v], ref, cfg.tile_size, cfg.workers).first;
  }

  const auto run_mode = [&](const splat::BinningConfig<float>& binning, double& ms,
                            std::int64_t& pairs, double& mean_diff) {
    ms = 0;
    pairs = 0;
    double diff_sum = 0;
    std::int64_t diff_n = 0;
    for (int v = 0; v < n_views; ++v) {
      const auto t0 = std::chrono::steady_clock::now();
      auto [img, p] = render_view(scene, data.cameras[v], binning, cfg.tile_size, cfg.workers);
      ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
      pairs += p;
      for (size_t i = 0; i < img.pixels.size(); ++i)
        diff_sum += (img.pixels[i] - reference[v].pixels[i]).cwiseAbs().sum();
      diff_n += static_cast<std::int64_t>(img.pixels.size()) * 3;
    }
    mean_diff = diff_sum / static_cast<double>(diff_n);
  };

  std::ostringstream csv;
  csv << "binning,beta,pairs,render_ms,mean_abs_diff_vs_beta1\n";
  char buf[160];
  {
    splat::BinningConfig<float> aabb;
    double ms, diff;
    std::int64_t pairs;
    run_mode(aabb, ms, pairs, diff);
    std::snprintf(buf, sizeof(buf), "aabb,,%lld,%.3f,%.9g\n", static_cast<long long>(pairs), ms,
                  diff);
    csv << buf;
  }
  for (const double beta : betas) {
    splat::BinningConfig<float> binning;
    binning.mode = splat::BinMode::kCompact;
    binning.beta = static_cast<float>(beta);
    binning.tau_alpha = static_cast<float>(cfg.tau_alpha);
    double ms, diff;
    std::int64_t pairs;
    run_mode(binning, ms, pairs, diff);
    std::snprintf(buf, sizeof(buf), "compact,%.4g,%lld,%.3f,%.9g\n", beta,
                  static_cast<long long>(pairs), ms, diff);
    csv << buf;
  }

  if (!out_path.empty()) {
    std::ofstream out(out_path);
    out << csv.str();
  }
  std::cout << csv.str();
  return 0;
}

int cmd_ablate(const std::string& data_dir, const std::string& out_dir,
               const CommonFlags& flags) {
  const splat::TrainConfig base = build_config(flags);
  const auto data = splat::load_dataset<float>(data_dir);
  fs::create_directories(out_dir);

  struct Row {
    const char* name;
    bool vcd, vcp, cb;
  };
  const Row rows[4] = {{"baseline", false, false, false},
                       {"vcd", true, false, false},
                       {"vcp", false, true, false},
                       {"full", true, true, true}};

  std::ostringstream csv;
  csv << "config,wall_s,mean_psnr,mean_ssim,gaussians,total_tile_pairs\n";
  for (const Row& row : rows) {
    splat::TrainConfig cfg = base;
    cfg.vcd = row.vcd;
    cfg.vcp = row.vcp;
    cfg.bin_mode = row.cb ? "compact" : "aabb";
    if (row.cb && cfg.beta >= 1.0) cfg.beta = 0.8;
    const TrainOutputs out =
        train_pipeline(data, cfg, (fs::path(out_dir) / row.name).string(), flags.plot);
    char buf[200];
    std::snprintf(buf, sizeof(buf), "%s,%.3f,%.6f,%.6f,%d,%lld\n", row.name, out.wall_seconds,
                  out.metrics["mean_psnr"].get<double>(), out.metrics["mean_ssim"].get<double>(),
                  out.final_count, out.metrics["total_tile_pairs"].get<long long>());
    csv << buf;
    std::cout << buf << std::flush;
  }
  std::ofstream out(fs::path(out_dir) / "ablation.csv");
  out << csv.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"splatkit: CPU 3D Gaussian splatting trainer with multi-view consistent "
               "density control"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string synth_out = "synthetic";
  splat::SynthSpec spec;
  synth->add_option("--out", synth_out, "output dataset directory")->required();
  synth->add_option("--gaussians", spec.n_gaussians, "ground-truth Gaussian count");
  synth->add_option("--views", spec.n_views, "number of camera views");
  synth->add_option("--size", spec.image_size, "square image size in pixels");
  synth->add_option("--seed", spec.seed, "RNG seed");

  // train
  auto* train = app.add_subcommand("train", "optimize a scene on a dataset");
  std::string train_data, train_out = "run";
  CommonFlags train_flags;
  train->add_option("--data", train_data, "dataset directory")->required();
  train->add_option("--out", train_out, "output directory");
  add_common_flags(train, train_flags);

  // render
  auto* render = app.add_subcommand("render", "render checkpoint views");
  std::string render_ckpt, render_data, render_out = "renders", render_split = "test";
  CommonFlags render_flags;
  render->add_option("--checkpoint", render_ckpt, "checkpoint PLY")->required();
  render->add_option("--data", render_data, "dataset directory")->required();
  render->add_option("--out", render_out, "output directory");
  render->add_option("--split", render_split, "view split: test, train or all");
  add_common_flags(render, render_flags);

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  std::string eval_ckpt, eval_data, eval_out;
  CommonFlags eval_flags;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint PLY")->required();
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--out", eval_out, "metrics JSON output path");
  add_common_flags(eval, eval_flags);

  // bench-tiles
  auto* bench = app.add_subcommand("bench-tiles", "tile-pair counts across binning modes");
  std::string bench_data, bench_ckpt, bench_betas = "1.0,0.9,0.8", bench_out;
  CommonFlags bench_flags;
  bench->add_option("--data", bench_data, "dataset directory")->required();
  bench->add_option("--checkpoint", bench_ckpt, "scene checkpoint (default: gt_checkpoint.ply)");
  bench->add_option("--betas", bench_betas, "comma-separated compact-box beta values");
  bench->add_option("--out", bench_out, "CSV output path");
  add_common_flags(bench, bench_flags);

  // ablate
  auto* ablate = app.add_subcommand("ablate", "baseline/+VCD/+VCP/full comparison runs");
  std::string ablate_data, ablate_out = "ablation";
  CommonFlags ablate_flags;
  ablate->add_option("--data", ablate_data, "dataset directory")->required();
  ablate->add_option("--out", ablate_out, "output directory");
  add_common_flags(ablate, ablate_flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      splat::generate_synthetic(spec, synth_out);
      std::cout << "synthetic dataset written to " << synth_out << "\n";
      return 0;
    }
    if (train->parsed()) return cmd_train(train_data, train_out, train_flags);
    if (render->parsed())
      return cmd_render(render_ckpt, render_data, render_out, render_split, render_flags);
    if (eval->parsed()) return cmd_eval(eval_ckpt, eval_data, eval_out, eval_flags);
    if (bench->parsed())
      return cmd_bench_tiles(bench_data, bench_ckpt, bench_betas, bench_out, bench_flags);
    if (ablate->parsed()) return cmd_ablate(ablate_data, ablate_out, ablate_flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
