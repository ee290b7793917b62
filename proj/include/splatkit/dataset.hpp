// Copyright Contributors to the splatkit project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "splatkit/camera.hpp"
#include "splatkit/ply.hpp"
#include "splatkit/png_io.hpp"
#include "splatkit/raster.hpp"
#include "splatkit/rng.hpp"
#include "splatkit/scene.hpp"
#include "splatkit/types.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace splat {

template <typename T>
struct Dataset {
  std::vector<Camera<T>> cameras;
  std::vector<int> camera_ids;
  std::vector<Image<T>> images;
  std::vector<std::pair<Vec3<T>, Vec3<T>>> init_points;
  std::vector<int> train_indices;
  std::vector<int> test_indices;
  T extent = T(1);  // bounding radius of the camera/point configuration
};

namespace detail {

inline std::string image_name(int id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05d.png", id);
  return buf;
}

// Every 8th view goes to the test split; a dataset too small for that
// keeps everything in the train split.
inline void split_views(int n, std::vector<int>& train, std::vector<int>& test) {
  train.clear();
  test.clear();
  for (int i = 0; i < n; ++i)
    (i % 8 == 0 ? test : train).push_back(i);
  if (train.empty()) {
    train = std::move(test);
    test.clear();
  }
}

template <typename T>
inline T scene_extent(const std::vector<Camera<T>>& cameras,
                      const std::vector<std::pair<Vec3<T>, Vec3<T>>>& points) {
  Vec3<T> center = Vec3<T>::Zero();
  for (const auto& c : cameras) center += c.center();
  if (!cameras.empty()) center /= T(cameras.size());
  T radius = T(0);
  for (const auto& c : cameras) radius = std::max(radius, (c.center() - center).norm());
  for (const auto& [p, _] : points) radius = std::max(radius, (p - center).norm());
  radius *= T(1.1);
  return radius > T(1e-9) ? radius : T(1);
}

}  // namespace detail

// Loads `cameras.json`, `images/*.png` and `points3d.ply` from a dataset
// directory. Image dimensions must match their camera records.
template <typename T>
inline Dataset<T> load_dataset(const std::string& path) {
  namespace fs = std::filesystem;
  const fs::path root(path);
  require(fs::exists(root / "cameras.json"), "dataset: missing " + (root / "cameras.json").string());
  require(fs::exists(root / "points3d.ply"), "dataset: missing " + (root / "points3d.ply").string());

  std::ifstream in(root / "cameras.json");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("dataset: malformed cameras.json: " + std::string(e.what()));
  }
  require(doc.is_array(), "dataset: cameras.json must be an array of camera records");

  Dataset<T> data;
  for (const auto& rec : doc) {
    for (const char* key : {"id", "width", "height", "fx", "fy", "cx", "cy", "world_to_cam"})
      require(rec.contains(key), std::string("dataset: camera record missing key '") + key + "'");
    Camera<T> cam;
    cam.width = rec["width"].get<int>();
    cam.height = rec["height"].get<int>();
    cam.fx = T(rec["fx"].get<double>());
    cam.fy = T(rec["fy"].get<double>());
    cam.cx = T(rec["cx"].get<double>());
    cam.cy = T(rec["cy"].get<double>());
    const auto& m = rec["world_to_cam"];
    require(m.is_array() && m.size() == 16, "dataset: world_to_cam must hold 16 floats");
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) cam.world_to_cam(r, c) = T(m[4 * r + c].get<double>());
    cam.validate();

    const int id = rec["id"].get<int>();
    const fs::path img_path = root / "images" / detail::image_name(id);
    require(fs::exists(img_path), "dataset: missing image " + img_path.string());
    Image<float> img = read_png(img_path.string());
    require(img.width == cam.width && img.height == cam.height,
            "dataset: image " + img_path.string() + " is " + std::to_string(img.width) + "x" +
                std::to_string(img.height) + " but camera " + std::to_string(id) + " expects " +
                std::to_string(cam.width) + "x" + std::to_string(cam.height));

    data.cameras.push_back(cam);
    data.camera_ids.push_back(id);
    data.images.push_back(img.template cast<T>());
  }
  require(!data.cameras.empty(), "dataset: cameras.json contains no cameras");

  data.init_points = read_points_ply<T>((root / "points3d.ply").string());
  detail::split_views(static_cast<int>(data.cameras.size()), data.train_indices,
                      data.test_indices);
  data.extent = detail::scene_extent(data.cameras, data.init_points);
  return data;
}

template <typename T>
inline void save_cameras_json(const std::string& path, const std::vector<Camera<T>>& cameras,
                              const std::vector<int>& ids) {
  nlohmann::json doc = nlohmann::json::array();
  for (size_t i = 0; i < cameras.size(); ++i) {
    const Camera<T>& cam = cameras[i];
    nlohmann::json rec;
    rec["id"] = ids[i];
    rec["width"] = cam.width;
    rec["height"] = cam.height;
    rec["fx"] = static_cast<double>(cam.fx);
    rec["fy"] = static_cast<double>(cam.fy);
    rec["cx"] = static_cast<double>(cam.cx);
    rec["cy"] = static_cast<double>(cam.cy);
    std::vector<double> m(16);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) m[4 * r + c] = static_cast<double>(cam.world_to_cam(r, c));
    rec["world_to_cam"] = m;
    doc.push_back(rec);
  }
  std::ofstream out(path);
  require(out.good(), "dataset: cannot write " + path);
  out << doc.dump(2) << "\n";
}

struct SynthSpec {
  int n_gaussians = 500;
  int n_views = 64;
  int image_size = 128;
  std::uint64_t seed = 1;
};

// World->camera rigid transform looking from `eye` toward `target`,
// x right, y down, z forward.
template <typename T>
inline Mat4<T> look_at(const Vec3<T>& eye, const Vec3<T>& target, const Vec3<T>& up) {
  const Vec3<T> z = (target - eye).normalized();
  const Vec3<T> x = z.cross(up).normalized();
  const Vec3<T> y = z.cross(x);
  Mat4<T> m = Mat4<T>::Identity();
  m.template block<1, 3>(0, 0) = x.transpose();
  m.template block<1, 3>(1, 0) = y.transpose();
  m.template block<1, 3>(2, 0) = z.transpose();
  m.template topRightCorner<3, 1>() = -(m.template topLeftCorner<3, 3>() * eye);
  return m;
}

// Random ground-truth scene in the unit cube, viewed from a camera ring,
// rendered with this module's own rasterizer. The init point cloud is the
// ground-truth positions perturbed by noise sized to the scene extent.
// Everything is seed-deterministic.
inline Scene<float> generate_synthetic(const SynthSpec& spec, const std::string& out_dir) {
  namespace fs = std::filesystem;
  require(spec.n_views >= 2, "synthetic: n_views must be >= 2");
  require(spec.n_gaussians >= 1, "synthetic: n_gaussians must be >= 1");
  Rng rng(spec.seed);

  Scene<float> gt;
  gt.sh_degree = 1;
  gt.gaussians.reserve(spec.n_gaussians);
  for (int i = 0; i < spec.n_gaussians; ++i) {
    Gaussian3D<float> g;
    for (int d = 0; d < 3; ++d) g.mu[d] = static_cast<float>(rng.uniform(-0.5, 0.5));
    Vec4<float> q;
    for (int d = 0; d < 4; ++d) q[d] = static_cast<float>(rng.normal());
    g.rot = q.norm() > 1e-6f ? Vec4<float>(q.normalized()) : Vec4<float>(1, 0, 0, 0);
    for (int d = 0; d < 3; ++d)
      g.log_scale[d] = std::log(static_cast<float>(rng.uniform(0.02, 0.075)));
    g.opacity_logit = logit(static_cast<float>(rng.uniform(0.25, 0.95)));
    g.sh = ShMatrix<float>::Zero(sh_coeff_count(gt.sh_degree), 3);
    for (int c = 0; c < 3; ++c)
      g.sh(0, c) = static_cast<float>((rng.uniform(0.05, 0.95) - 0.5) / kShC0);
    for (int m = 1; m < sh_coeff_count(gt.sh_degree); ++m)
      for (int c = 0; c < 3; ++c) g.sh(m, c) = static_cast<float>(rng.uniform(-0.1, 0.1));
    gt.gaussians.push_back(std::move(g));
  }

  const int size = spec.image_size;
  std::vector<Camera<float>> cameras;
  std::vector<int> ids;
  const float ring_radius = 2.4f;
  const float ring_height = 1.0f;
  for (int v = 0; v < spec.n_views; ++v) {
    const float angle = 2.0f * static_cast<float>(M_PI) * v / spec.n_views;
    Camera<float> cam;
    cam.width = size;
    cam.height = size;
    cam.fx = cam.fy = 1.1f * size;
    cam.cx = cam.cy = (size - 1) / 2.0f;
    cam.near = 0.2f;
    const Vec3<float> eye(ring_radius * std::cos(angle), ring_radius * std::sin(angle),
                          ring_height);
    cam.world_to_cam = look_at<float>(eye, Vec3<float>::Zero(), Vec3<float>(0, 0, 1));
    cameras.push_back(cam);
    ids.push_back(v);
  }

  fs::create_directories(fs::path(out_dir) / "images");
  save_cameras_json(fs::path(out_dir) / "cameras.json", cameras, ids);

  const BinningConfig<float> binning;  // aabb
  for (int v = 0; v < spec.n_views; ++v) {
    const auto pgs = project_scene(gt, cameras[v]);
    const TileGrid grid = build_tile_grid(pgs, size, size, binning);
    const RenderOutputs<float> out = blend_forward(grid, pgs);
    write_png((fs::path(out_dir) / "images" / detail::image_name(ids[v])).string(), out.image);
  }

  std::vector<std::pair<Vec3<float>, Vec3<float>>> points;
  points.reserve(spec.n_gaussians);
  const float extent = detail::scene_extent<float>(cameras, {});
  const float noise = 0.05f * extent;
  for (const auto& g : gt.gaussians) {
    Vec3<float> p = g.mu;
    for (int d = 0; d < 3; ++d) p[d] += noise * static_cast<float>(rng.normal());
    Vec3<float> color;
    for (int c = 0; c < 3; ++c)
      color[c] = std::clamp(0.5f + static_cast<float>(kShC0) * g.sh(0, c), 0.0f, 1.0f);
    points.push_back({p, color});
  }
  write_points_ply((fs::path(out_dir) / "points3d.ply").string(), points);
  save_checkpoint(gt, (fs::path(out_dir) / "gt_checkpoint.ply").string());
  return gt;
}

}  // namespace splat
