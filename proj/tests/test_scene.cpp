// Copyright Contributors to the splatkit project
// SPDX-License-Identifier: Apache-2.0
#include "splatkit/scene.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

using namespace splat;

TEST_CASE("covariance_3d identity case") {
  const Mat3<double> cov =
      covariance_3d<double>(Vec4<double>(1, 0, 0, 0), Vec3<double>(1, 1, 1));
  CHECK((cov - Mat3<double>::Identity()).norm() == doctest::Approx(0).epsilon(1e-12));
}

TEST_CASE("covariance_3d axis-aligned scaling") {
  const Mat3<double> cov =
      covariance_3d<double>(Vec4<double>(1, 0, 0, 0), Vec3<double>(2, 1, 1));
  Mat3<double> expected = Mat3<double>::Identity();
  expected(0, 0) = 4;
  CHECK((cov - expected).norm() == doctest::Approx(0).epsilon(1e-12));
}

TEST_CASE("covariance_3d 90 degrees about z against matrix-algebra oracle") {
  const double s = std::sqrt(0.5);
  const Vec4<double> q(s, 0, 0, s);  // 90 deg about z
  const Vec3<double> scale(2, 1, 1);
  const Mat3<double> cov = covariance_3d(q, scale);

  // independent construction through Eigen's angle-axis rotation
  const Mat3<double> r =
      Eigen::AngleAxisd(M_PI / 2, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  const Mat3<double> oracle = r * scale.asDiagonal() * scale.asDiagonal() * r.transpose();
  CHECK((cov - oracle).norm() < 1e-12);

  Mat3<double> expected;
  expected << 1, 0, 0, 0, 4, 0, 0, 0, 1;
  CHECK((cov - expected).norm() < 1e-12);
}

TEST_CASE("covariance_3d spectrum equals squared scales for random rotations") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Vec4<double> q;
    for (int d = 0; d < 4; ++d) q[d] = rng.normal();
    q.normalize();
    const Vec3<double> scale(rng.uniform(0.1, 3), rng.uniform(0.1, 3), rng.uniform(0.1, 3));
    const Mat3<double> cov = covariance_3d(q, scale);
    CHECK((cov - cov.transpose()).norm() < 1e-12);

    Eigen::SelfAdjointEigenSolver<Mat3<double>> solver(cov);
    Vec3<double> expected = (scale.array() * scale.array()).matrix();
    std::sort(expected.data(), expected.data() + 3);
    for (int d = 0; d < 3; ++d)
      CHECK(solver.eigenvalues()[d] ==
            doctest::Approx(expected[d]).epsilon(1e-9));
  }
}

TEST_CASE("covariance_3d quaternion double cover is exact") {
  Rng rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    Vec4<double> q;
    for (int d = 0; d < 4; ++d) q[d] = rng.normal();
    const Vec3<double> scale(rng.uniform(0.1, 2), rng.uniform(0.1, 2), rng.uniform(0.1, 2));
    const Mat3<double> a = covariance_3d(q, scale);
    const Mat3<double> b = covariance_3d<double>(-q, scale);
    CHECK((a - b).norm() == 0.0);  // bitwise: both normalize to sign-flipped quats
  }
}

TEST_CASE("covariance_3d rejects bad inputs") {
  CHECK_THROWS_AS(covariance_3d<double>(Vec4<double>(1, 0, 0, 0), Vec3<double>(1, -1, 1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(covariance_3d<double>(
                      Vec4<double>(std::numeric_limits<double>::quiet_NaN(), 0, 0, 0),
                      Vec3<double>(1, 1, 1)),
                  std::invalid_argument);
}

TEST_CASE("activation round trip") {
  for (const double x : {0.01, 0.1, 0.5, 0.99})
    CHECK(sigmoid(logit(x)) == doctest::Approx(x).epsilon(1e-12));
}

TEST_CASE("covariance_3d backward matches finite differences") {
  Rng rng(13);
  Vec4<double> q;
  for (int d = 0; d < 4; ++d) q[d] = rng.normal();
  const Vec3<double> scale(0.7, 1.3, 0.4);
  Mat3<double> upstream;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) upstream(r, c) = rng.uniform(-1, 1);

  Vec4<double> d_rot;
  Vec3<double> d_scale;
  covariance_3d_backward(q, scale, upstream, d_rot, d_scale);

  for (int d = 0; d < 4; ++d) {
    const double fd = test::central_diff(
        [&](double v) {
          Vec4<double> qq = q;
          qq[d] = v;
          return covariance_3d(qq, scale).cwiseProduct(upstream).sum();
        },
        q[d]);
    CHECK(test::rel_err(d_rot[d], fd) < 1e-6);
  }
  for (int d = 0; d < 3; ++d) {
    const double fd = test::central_diff(
        [&](double v) {
          Vec3<double> ss = scale;
          ss[d] = v;
          return covariance_3d(q, ss).cwiseProduct(upstream).sum();
        },
        scale[d]);
    CHECK(test::rel_err(d_scale[d], fd) < 1e-6);
  }
}

TEST_CASE("init_from_points single point") {
  const Vec3<double> grey(0.5, 0.5, 0.5);
  const auto scene = init_from_points<double>({{Vec3<double>::Zero(), grey}});
  REQUIRE(scene.size() == 1);
  CHECK(scene.gaussians[0].mu.norm() == 0.0);
  CHECK(scene.gaussians[0].opacity() == doctest::Approx(0.1).epsilon(1e-12));
  // grey maps to a zero DC term
  CHECK(scene.gaussians[0].sh.row(0).norm() == doctest::Approx(0).epsilon(1e-12));
  CHECK(scene.gaussians[0].rot == Vec4<double>(1, 0, 0, 0));
}

TEST_CASE("init_from_points nearest-neighbor fallback with two points") {
  const Vec3<double> c(0.3, 0.4, 0.5);
  const auto scene = init_from_points<double>(
      {{Vec3<double>(0, 0, 0), c}, {Vec3<double>(1, 0, 0), c}});
  REQUIRE(scene.size() == 2);
  for (const auto& g : scene.gaussians)
    for (int d = 0; d < 3; ++d) CHECK(g.log_scale[d] == doctest::Approx(std::log(1.0)));
}

TEST_CASE("init_from_points unit tetrahedron scales") {
  // regular tetrahedron with unit edge length
  const double k = 1.0 / (2.0 * std::sqrt(2.0));
  const Vec3<double> c(0.5, 0.5, 0.5);
  const std::vector<std::pair<Vec3<double>, Vec3<double>>> pts = {
      {k * Vec3<double>(1, 1, 1), c},
      {k * Vec3<double>(1, -1, -1), c},
      {k * Vec3<double>(-1, 1, -1), c},
      {k * Vec3<double>(-1, -1, 1), c}};
  const auto scene = init_from_points(pts);
  for (const auto& g : scene.gaussians)
    for (int d = 0; d < 3; ++d)
      CHECK(g.log_scale[d] == doctest::Approx(std::log(1.0)).epsilon(1e-9));
}

TEST_CASE("init_from_points rejects empty input") {
  CHECK_THROWS(init_from_points<double>({}));
}

TEST_CASE("init_from_points color round trips through sh evaluation") {
  const Vec3<double> color(0.8, 0.3, 0.6);
  const auto scene = init_from_points<double>({{Vec3<double>::Zero(), color}}, 0);
  const Vec3<double> back =
      evaluate_sh<double>(scene.gaussians[0].sh, Vec3<double>(0, 0, 1), 0);
  CHECK((back - color).norm() < 1e-12);
}
