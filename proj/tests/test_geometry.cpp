/*
 * Copyright (C) 2026 The voxsplat authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <doctest.h>

#include <random>

#include "voxsplat/geometry.hpp"

using namespace voxsplat;

namespace {

Quaternion random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Quaternion q{nd(rng), nd(rng), nd(rng), nd(rng)};
  return q.normalized();
}

Pose random_pose(std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Pose p;
  p.rotation = quat_to_rotmat(random_quat(rng));
  p.translation = Eigen::Vector3d(nd(rng), nd(rng), nd(rng));
  return p;
}

}  // namespace

TEST_CASE("quat_to_rotmat is orthonormal with unit determinant") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    Eigen::Matrix3d r = quat_to_rotmat(random_quat(rng));
    CHECK(((r.transpose() * r) - Eigen::Matrix3d::Identity()).norm() < 1e-9);
    CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("quat_to_rotmat known axis rotations") {
  // 90 degrees about z: (w,x,y,z) = (cos45, 0, 0, sin45).
  const double s = std::sqrt(0.5);
  Eigen::Matrix3d r = quat_to_rotmat({s, 0, 0, s});
  Eigen::Vector3d v = r * Eigen::Vector3d(1, 0, 0);
  CHECK(v.x() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(v.y() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(quat_to_rotmat({1, 0, 0, 0}).isApprox(Eigen::Matrix3d::Identity(), 1e-15));
  CHECK_THROWS(quat_to_rotmat({0, 0, 0, 0}));
}

TEST_CASE("project_pinhole fixed points") {
  Intrinsics k{100, 100, 50, 50, 100, 100};
  auto p = project_pinhole(k, {0, 0, 1});
  CHECK(p.u == doctest::Approx(50.0));
  CHECK(p.v == doctest::Approx(50.0));
  CHECK(p.depth == doctest::Approx(1.0));
  CHECK(!p.clipped);

  auto q = project_pinhole(k, {1, 0, 2});
  CHECK(q.u == doctest::Approx(100.0));
  CHECK(q.v == doctest::Approx(50.0));

  CHECK(project_pinhole(k, {0, 0, 0.01}).clipped);
}

TEST_CASE("unproject then project round-trips") {
  Intrinsics k{120, 110, 64, 60, 128, 120};
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 128), z(0.5, 50.0);
  for (int i = 0; i < 100; ++i) {
    const double uu = u(rng), vv = u(rng), zz = z(rng);
    Eigen::Vector3d p = unproject_pinhole(k, uu, vv, zz);
    auto proj = project_pinhole(k, p);
    CHECK(std::fabs(proj.u - uu) < 1e-10);
    CHECK(std::fabs(proj.v - vv) < 1e-10);
    CHECK(std::fabs(proj.depth - zz) < 1e-10);
  }
}

TEST_CASE("projection_jacobian closed form and finite differences") {
  Intrinsics k{1, 1, 0, 0, 100, 100};
  Eigen::Matrix<double, 2, 3> j = projection_jacobian(k, {0, 0, 1});
  CHECK(j(0, 0) == doctest::Approx(1.0));
  CHECK(j(1, 1) == doctest::Approx(1.0));
  CHECK(j(0, 1) == doctest::Approx(0.0));
  CHECK(j(0, 2) == doctest::Approx(0.0));

  // Doubling z halves the leading diagonal.
  Eigen::Matrix<double, 2, 3> j2 = projection_jacobian(k, {0, 0, 2});
  CHECK(j2(0, 0) == doctest::Approx(0.5 * j(0, 0)));

  Intrinsics kr{150, 140, 64, 64, 128, 128};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> xy(-2, 2), z(0.5, 50.0);
  const double h = 1e-5;
  for (int i = 0; i < 100; ++i) {
    Eigen::Vector3d p(xy(rng), xy(rng), z(rng));
    Eigen::Matrix<double, 2, 3> a = projection_jacobian(kr, p);
    for (int c = 0; c < 3; ++c) {
      Eigen::Vector3d pp = p, pm = p;
      pp[c] += h;
      pm[c] -= h;
      auto fp = project_pinhole(kr, pp);
      auto fm = project_pinhole(kr, pm);
      const double du = (fp.u - fm.u) / (2 * h);
      const double dv = (fp.v - fm.v) / (2 * h);
      CHECK(std::fabs(a(0, c) - du) / std::max({std::fabs(du), 1.0}) < 1e-6);
      CHECK(std::fabs(a(1, c) - dv) / std::max({std::fabs(dv), 1.0}) < 1e-6);
    }
  }
  CHECK_THROWS(projection_jacobian(kr, {0, 0, 0.01}));
}

TEST_CASE("relative_pose identity, inverse composition, world transport") {
  std::mt19937_64 rng(17);
  Pose a = random_pose(rng), b = random_pose(rng), c = random_pose(rng);

  Pose id = relative_pose(a, a);
  CHECK((id.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-10);
  CHECK(id.translation.norm() < 1e-10);

  Pose ab = relative_pose(a, b);
  Pose ba = relative_pose(b, a);
  Eigen::Matrix3d r = ba.rotation * ab.rotation;
  Eigen::Vector3d t = ba.rotation * ab.translation + ba.translation;
  CHECK((r - Eigen::Matrix3d::Identity()).norm() < 1e-10);
  CHECK(t.norm() < 1e-10);

  // Transport through the relative pose equals going via world coordinates.
  std::normal_distribution<double> nd;
  for (int i = 0; i < 20; ++i) {
    Eigen::Vector3d pw(nd(rng), nd(rng), nd(rng));
    Eigen::Vector3d via_rel = ab.rotation * world_to_camera(a, pw) + ab.translation;
    Eigen::Vector3d direct = world_to_camera(b, pw);
    CHECK((via_rel - direct).norm() < 1e-10);
  }

  // Associativity under composition with a third pose.
  Pose bc = relative_pose(b, c);
  Pose ac = relative_pose(a, c);
  Eigen::Matrix3d r2 = bc.rotation * ab.rotation;
  Eigen::Vector3d t2 = bc.rotation * ab.translation + bc.translation;
  CHECK((r2 - ac.rotation).norm() < 1e-10);
  CHECK((t2 - ac.translation).norm() < 1e-10);
}

TEST_CASE("pose inverse and center") {
  std::mt19937_64 rng(23);
  Pose a = random_pose(rng);
  Pose inv = a.inverse();
  CHECK((inv.rotation * a.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-12);
  CHECK((world_to_camera(a, a.center())).norm() < 1e-12);
}
