// Copyright Contributors to the splatkit project
// SPDX-License-Identifier: Apache-2.0
#include "splatkit/adc.hpp"

#include "splatkit/error_maps.hpp"

#include "helpers.hpp"

#include <doctest.h>

using namespace splat;

namespace {

Scene<double> two_gaussian_scene() {
  Scene<double> scene;
  scene.sh_degree = 0;
  for (int i = 0; i < 2; ++i) {
    Gaussian3D<double> g;
    g.mu = Vec3<double>(i == 0 ? -0.3 : 0.3, 0, 3);
    g.log_scale = Vec3<double>::Constant(std::log(0.08));
    g.opacity_logit = logit(0.8);
    g.sh = ShMatrix<double>::Zero(1, 3);
    g.sh.row(0) << (i == 0 ? 1.2 : -0.8), 0.2, 0.2;
    scene.gaussians.push_back(g);
  }
  return scene;
}

ScoreTable<double> table_with(int n, std::function<void(ScoreTable<double>&)> fill) {
  ScoreTable<double> t;
  t.reset(n);
  fill(t);
  return t;
}

}  // namespace

TEST_CASE("densify score is the mean count across sampled views") {
  // one gaussian touching 3 high-error pixels in view 1 and 5 in view 2
  ScoreTable<double> table;
  scores_from_counts<double>({{3}, {5}}, {0.1, 0.1}, table);
  CHECK(table.s_d[0] == doctest::Approx(4.0));
}

TEST_CASE("pruning score weights counts by photometric loss then min-max normalizes") {
  // K=1: counts {4, 0}, photometric 0.25 -> raw {1.0, 0}, normalized {1, 0}
  ScoreTable<double> table;
  scores_from_counts<double>({{4, 0}}, {0.25}, table);
  CHECK(table.s_p_raw[0] == doctest::Approx(1.0));
  CHECK(table.s_p_raw[1] == doctest::Approx(0.0));
  CHECK(table.s_p[0] == doctest::Approx(1.0));
  CHECK(table.s_p[1] == doctest::Approx(0.0));
}

TEST_CASE("min-max normalization degenerate population goes to zeros") {
  CHECK(minmax_normalize<double>({0.7, 0.7, 0.7}) == std::vector<double>{0, 0, 0});
  CHECK(minmax_normalize<double>({}) == std::vector<double>{});
  const auto n = minmax_normalize<double>({2.0, 6.0, 10.0});
  CHECK(n[0] == doctest::Approx(0.0));
  CHECK(n[1] == doctest::Approx(0.5));
  CHECK(n[2] == doctest::Approx(1.0));
}

TEST_CASE("s_p is invariant under positive rescaling of raw scores") {
  const std::vector<double> raw = {0.0, 3.0, 1.5, 7.5};
  std::vector<double> scaled = raw;
  for (auto& v : scaled) v *= 42.0;
  const auto a = minmax_normalize(raw);
  const auto b = minmax_normalize(scaled);
  for (size_t i = 0; i < raw.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("accumulate_scores matches an independent per-view reconstruction") {
  Rng rng(71);
  Scene<double> scene = test::random_scene<double>(rng, 8, 0, 0.7);
  const Camera<double> cam_a = test::default_camera<double>(24, 24);
  Camera<double> cam_b = cam_a;
  cam_b.world_to_cam(0, 3) = 0.15;  // second viewpoint, shifted

  // ground-truth images deliberately different from the renders
  Image<double> gt_a(24, 24), gt_b(24, 24);
  for (auto& p : gt_a.pixels) p = Vec3<double>(0.1, 0.1, 0.1);
  for (auto& p : gt_b.pixels) p = Vec3<double>(0.6, 0.2, 0.1);

  ScoreTable<double> table;
  table.reset(scene.size());
  accumulate_scores<double>(scene, {{&cam_a, &gt_a}, {&cam_b, &gt_b}}, 0.5, 0.2,
                            BinningConfig<double>{}, 16, table);

  // independent pipeline: brute-force render, error maps, brute-force
  // footprint counting
  std::vector<std::vector<int>> counts;
  std::vector<double> photometric;
  for (const auto& [cam, gt] : std::vector<std::pair<const Camera<double>*, Image<double>*>>{
           {&cam_a, &gt_a}, {&cam_b, &gt_b}}) {
    const auto pgs = project_scene(scene, *cam);
    const auto rendered = test::brute_force_render(pgs, 24, 24);
    const auto maps = build_error_maps(rendered.image, *gt, 0.5, 0.2);
    std::vector<int> c(scene.size(), 0);
    test::brute_force_render(pgs, 24, 24, &maps.mask, &c);
    counts.push_back(c);
    photometric.push_back(maps.photometric);
  }
  for (int i = 0; i < scene.size(); ++i) {
    CHECK(table.s_d[i] == doctest::Approx(0.5 * (counts[0][i] + counts[1][i])));
    CHECK(table.s_p_raw[i] == doctest::Approx(counts[0][i] * photometric[0] +
                                              counts[1][i] * photometric[1]));
  }
}

TEST_CASE("a gaussian culled in every sampled view scores zero and is never densified") {
  Scene<double> scene = two_gaussian_scene();
  scene.gaussians[1].mu = Vec3<double>(0, 0, -5);  // behind the camera
  const Camera<double> cam = test::default_camera<double>(24, 24);
  Image<double> gt(24, 24);

  ScoreTable<double> table;
  table.reset(scene.size());
  accumulate_scores<double>(scene, {{&cam, &gt}}, 0.5, 0.2, BinningConfig<double>{}, 16, table);
  CHECK(table.s_d[1] == 0.0);
  CHECK(table.s_p_raw[1] == 0.0);

  // even with a huge gradient accumulator it cannot be densified: the
  // score conjunction fails and views_seen stays zero
  table.grad_norm_acc[1] = 100.0;
  table.abs_grad_acc[1] = 100.0;
  const auto sel = select_densify(table, scene, DensifyParams<double>{}, 1.0);
  CHECK(std::find(sel.clone.begin(), sel.clone.end(), 1) == sel.clone.end());
  CHECK(std::find(sel.split.begin(), sel.split.end(), 1) == sel.split.end());
}

TEST_CASE("accumulate_scores requires at least one view") {
  const Scene<double> scene = two_gaussian_scene();
  ScoreTable<double> table;
  table.reset(scene.size());
  CHECK_THROWS(accumulate_scores<double>(scene, {}, 0.5, 0.2, BinningConfig<double>{}, 16,
                                         table));
}

TEST_CASE("select_densify needs both the score and the gradient criterion") {
  Scene<double> scene = two_gaussian_scene();
  scene.gaussians[0].log_scale = Vec3<double>::Constant(std::log(0.001));  // small: clone path
  DensifyParams<double> params;  // tau_d = 5, grad_threshold = 2e-4

  // score 3 <= tau_d 5: not selected despite a large gradient
  auto t1 = table_with(2, [](ScoreTable<double>& t) {
    t.s_d = {3.0, 0.0};
    t.grad_norm_acc = {1.0, 0.0};
    t.views_seen = {1, 1};
  });
  CHECK(select_densify(t1, scene, params, 1.0).clone.empty());

  // gradient below threshold: not selected despite score 100
  auto t2 = table_with(2, [](ScoreTable<double>& t) {
    t.s_d = {100.0, 0.0};
    t.grad_norm_acc = {1e-6, 0.0};
    t.views_seen = {1, 1};
  });
  CHECK(select_densify(t2, scene, params, 1.0).clone.empty());
  CHECK(select_densify(t2, scene, params, 1.0).split.empty());

  // both criteria met on a small gaussian: clone set
  auto t3 = table_with(2, [&](ScoreTable<double>& t) {
    t.s_d = {6.0, 0.0};
    t.grad_norm_acc = {2 * params.grad_threshold, 0.0};
    t.views_seen = {1, 1};
  });
  const auto sel = select_densify(t3, scene, params, 1.0);
  CHECK(sel.clone == std::vector<int>{0});
  CHECK(sel.split.empty());
}

TEST_CASE("select_densify routes large gaussians to split by the absolute gradient") {
  Scene<double> scene = two_gaussian_scene();
  scene.gaussians[0].log_scale = Vec3<double>::Constant(std::log(0.5));  // large
  DensifyParams<double> params;
  auto t = table_with(2, [&](ScoreTable<double>& t) {
    t.s_d = {9.0, 9.0};
    t.grad_norm_acc = {0.0, 0.0};       // vanilla gradient cancelled out
    t.abs_grad_acc = {10 * params.grad_threshold, 0.0};
    t.views_seen = {1, 1};
  });
  const auto sel = select_densify(t, scene, params, 1.0);
  CHECK(sel.split == std::vector<int>{0});
  CHECK(sel.clone.empty());
}

TEST_CASE("vcd selection is a subset of the gradient-only selection") {
  Rng rng(72);
  Scene<double> scene = test::random_scene<double>(rng, 40);
  auto t = table_with(40, [&](ScoreTable<double>& t) {
    for (int i = 0; i < 40; ++i) {
      t.s_d[i] = rng.uniform(0, 12);
      t.grad_norm_acc[i] = rng.uniform(0, 6e-4);
      t.abs_grad_acc[i] = rng.uniform(0, 6e-4);
      t.views_seen[i] = 1;
    }
  });
  DensifyParams<double> with_vcd;
  DensifyParams<double> gradient_only;
  gradient_only.use_vcd = false;
  const auto a = select_densify(t, scene, with_vcd, 1.0);
  const auto b = select_densify(t, scene, gradient_only, 1.0);
  for (const int i : a.clone) CHECK(std::find(b.clone.begin(), b.clone.end(), i) != b.clone.end());
  for (const int i : a.split) CHECK(std::find(b.split.begin(), b.split.end(), i) != b.split.end());
}

TEST_CASE("apply_densify cardinality and child parameters") {
  Rng rng(73);
  Scene<double> scene = test::random_scene<double>(rng, 5);
  ScoreTable<double> table;
  table.reset(5);

  SUBCASE("empty selection leaves the scene unchanged") {
    const Scene<double> before = scene;
    apply_densify(scene, {}, {}, table, 0.01, rng);
    REQUIRE(scene.size() == 5);
    for (int i = 0; i < 5; ++i) CHECK(scene.gaussians[i].mu == before.gaussians[i].mu);
  }

  SUBCASE("one split removes the parent and adds two children") {
    const Gaussian3D<double> parent = scene.gaussians[2];
    const auto remap = apply_densify(scene, {}, {2}, table, 0.01, rng);
    CHECK(scene.size() == 6);  // n + |split|
    CHECK(remap.old_to_new[2] == -1);
    // children sit at the end with scale shrunk by 1.6
    for (int c = 0; c < 2; ++c) {
      const auto& child = scene.gaussians[4 + c];
      for (int d = 0; d < 3; ++d)
        CHECK(child.log_scale[d] ==
              doctest::Approx(parent.log_scale[d] - std::log(1.6)).epsilon(1e-12));
      CHECK(child.rot == parent.rot);
      CHECK(child.opacity_logit == parent.opacity_logit);
    }
  }

  SUBCASE("split children scale: parent activated scale 1.6 becomes 1.0") {
    scene.gaussians[0].log_scale = Vec3<double>::Constant(std::log(1.6));
    apply_densify(scene, {}, {0}, table, 0.01, rng);
    const auto& child = scene.gaussians.back();
    for (int d = 0; d < 3; ++d) CHECK(child.scale()[d] == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("clone duplicates with a one-step gradient offset") {
    table.grad3d_acc[1] = Vec3<double>(1.0, -2.0, 0.5);
    table.views_seen[1] = 2;
    const Vec3<double> parent_mu = scene.gaussians[1].mu;
    const auto remap = apply_densify(scene, {1}, {}, table, 0.01, rng);
    CHECK(scene.size() == 6);  // n + |clone|
    CHECK(remap.old_to_new[1] == 1);  // original survives in place
    const Vec3<double> expected = parent_mu - 0.01 * Vec3<double>(0.5, -1.0, 0.25);
    CHECK((scene.gaussians[5].mu - expected).norm() < 1e-12);
  }

  SUBCASE("clone and split together") {
    apply_densify(scene, {0, 3}, {1}, table, 0.01, rng);
    CHECK(scene.size() == 5 + 2 + 1);
  }
}

TEST_CASE("select_prune late phase: opacity and score rules") {
  Scene<double> scene = two_gaussian_scene();
  scene.gaussians.push_back(scene.gaussians[0]);
  scene.gaussians[0].opacity_logit = logit(0.05);
  scene.gaussians[1].opacity_logit = logit(0.5);
  scene.gaussians[2].opacity_logit = logit(0.5);
  PruneParams<double> params;  // densify_until 15000, tau_p 0.9

  auto t = table_with(3, [](ScoreTable<double>& t) { t.s_p = {0.2, 0.95, 0.5}; });
  const auto pruned = select_prune(t, scene, 15000, params, 1.0);
  // 0: opacity 0.05 < 0.1; 1: score 0.95 > 0.9; 2: survives
  CHECK(pruned == std::vector<int>{0, 1});
}

TEST_CASE("select_prune early phase keeps the top-scoring half of vanilla candidates") {
  Scene<double> scene;
  scene.sh_degree = 0;
  for (int i = 0; i < 6; ++i) {
    Gaussian3D<double> g;
    g.mu = Vec3<double>(0, 0, 3);
    g.log_scale = Vec3<double>::Constant(std::log(0.05));
    // first four are vanilla candidates (opacity below 0.005)
    g.opacity_logit = logit(i < 4 ? 0.004 : 0.5);
    g.sh = ShMatrix<double>::Zero(1, 3);
    scene.gaussians.push_back(g);
  }
  auto t = table_with(6, [](ScoreTable<double>& t) {
    t.s_p = {0.1, 0.2, 0.8, 0.9, 0.0, 0.0};
  });
  const auto pruned = select_prune(t, scene, 1000, PruneParams<double>{}, 1.0);
  CHECK(pruned == std::vector<int>{2, 3});  // the 0.8 and 0.9 members
}

TEST_CASE("select_prune early phase without vcp prunes every vanilla candidate") {
  Scene<double> scene = two_gaussian_scene();
  scene.gaussians[0].opacity_logit = logit(0.004);
  PruneParams<double> params;
  params.use_vcp = false;
  auto t = table_with(2, [](ScoreTable<double>& t) { t.s_p = {0.0, 0.0}; });
  CHECK(select_prune(t, scene, 1000, params, 1.0) == std::vector<int>{0});
}

TEST_CASE("select_prune oversize rules activate only after size_prune_from") {
  Scene<double> scene = two_gaussian_scene();
  scene.gaussians[0].log_scale = Vec3<double>::Constant(std::log(0.5));  // > 0.1 * extent
  auto t = table_with(2, [](ScoreTable<double>& t) { t.s_p = {1.0, 0.0}; });
  PruneParams<double> params;
  CHECK(select_prune(t, scene, 1000, params, 1.0).empty());   // before size_prune_from
  CHECK(select_prune(t, scene, 4000, params, 1.0) == std::vector<int>{0});
}

TEST_CASE("select_prune never empties the scene") {
  Scene<double> scene = two_gaussian_scene();
  scene.gaussians[0].opacity_logit = logit(0.01);
  scene.gaussians[1].opacity_logit = logit(0.01);
  auto t = table_with(2, [](ScoreTable<double>& t) { t.s_p = {0.4, 0.6}; });
  const auto pruned = select_prune(t, scene, 20000, PruneParams<double>{}, 1.0);
  CHECK(pruned == std::vector<int>{1});  // index 0 has the lowest score and survives
}

TEST_CASE("apply_prune compacts the scene and reports the remap") {
  Rng rng(74);
  Scene<double> scene = test::random_scene<double>(rng, 5);
  const Vec3<double> kept_mu = scene.gaussians[3].mu;
  const auto remap = apply_prune(scene, {0, 2});
  CHECK(scene.size() == 3);
  CHECK(remap.old_to_new[0] == -1);
  CHECK(remap.old_to_new[1] == 0);
  CHECK(remap.old_to_new[3] == 1);
  CHECK(scene.gaussians[1].mu == kept_mu);
}
