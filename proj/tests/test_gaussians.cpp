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

#include <algorithm>
#include <random>

#include "voxsplat/gaussians.hpp"

using namespace voxsplat;

namespace {

Quaternion random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Quaternion q{nd(rng), nd(rng), nd(rng), nd(rng)};
  return q.normalized();
}

}  // namespace

TEST_CASE("build_covariance identity and squared scales") {
  CHECK(build_covariance({1, 0, 0, 0}, {1, 1, 1}).isApprox(Eigen::Matrix3d::Identity(), 1e-15));
  Eigen::Matrix3d s = build_covariance({1, 0, 0, 0}, {2, 1, 1});
  CHECK(s(0, 0) == doctest::Approx(4.0));
  CHECK(s(1, 1) == doctest::Approx(1.0));
  CHECK(s(2, 2) == doctest::Approx(1.0));
  CHECK_THROWS(build_covariance({1, 0, 0, 0}, {0.0, 1, 1}));
}

TEST_CASE("build_covariance eigenvalues are the squared scales") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> us(0.2, 3.0);
  for (int i = 0; i < 30; ++i) {
    Eigen::Vector3d s(us(rng), us(rng), us(rng));
    Eigen::Matrix3d sigma = build_covariance(random_quat(rng), s);
    CHECK((sigma - sigma.transpose()).norm() == 0.0);  // constructed symmetric
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(sigma);
    std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + 3);
    std::vector<double> s2{s.x() * s.x(), s.y() * s.y(), s.z() * s.z()};
    std::sort(ev.begin(), ev.end());
    std::sort(s2.begin(), s2.end());
    for (int k = 0; k < 3; ++k) CHECK(std::fabs(ev[static_cast<size_t>(k)] - s2[static_cast<size_t>(k)]) < 1e-9);
  }
}

TEST_CASE("project_covariance closed form, isotropy, linearity") {
  const double lp = 0.3;
  Eigen::Matrix<double, 2, 3> j;
  j << 1, 0, 0, 0, 1, 0;
  Eigen::Matrix2d p = project_covariance(Eigen::Matrix3d::Identity(), Pose::identity(), j, lp);
  CHECK(p.isApprox(Eigen::Matrix2d::Identity() * (1.0 + lp), 1e-14));

  std::mt19937_64 rng(41);
  Pose rot;
  rot.rotation = quat_to_rotmat(random_quat(rng));
  Eigen::Matrix2d iso = project_covariance(4.0 * Eigen::Matrix3d::Identity(), rot, j, lp);
  CHECK(iso.isApprox(Eigen::Matrix2d::Identity() * (4.0 + lp), 1e-12));

  // Random case vs an explicit dense product oracle.
  std::normal_distribution<double> nd;
  Eigen::Matrix3d a = Eigen::Matrix3d::NullaryExpr([&](int, int) { return nd(rng); });
  Eigen::Matrix3d sigma = a * a.transpose();
  Eigen::Matrix<double, 2, 3> jr = Eigen::Matrix<double, 2, 3>::NullaryExpr([&](int, int) { return nd(rng); });
  Eigen::Matrix2d got = project_covariance(sigma, rot, jr, lp);
  Eigen::Matrix2d want =
      jr * rot.rotation * sigma * rot.rotation.transpose() * jr.transpose() + lp * Eigen::Matrix2d::Identity();
  CHECK((got - want).norm() < 1e-12);

  // Linearity in sigma after subtracting the low-pass term.
  Eigen::Matrix3d b = Eigen::Matrix3d::NullaryExpr([&](int, int) { return nd(rng); });
  Eigen::Matrix3d sigma2 = b * b.transpose();
  Eigen::Matrix2d lhs =
      project_covariance(2.0 * sigma + 3.0 * sigma2, rot, jr, lp) - lp * Eigen::Matrix2d::Identity();
  Eigen::Matrix2d rhs = 2.0 * (project_covariance(sigma, rot, jr, lp) - lp * Eigen::Matrix2d::Identity()) +
                        3.0 * (project_covariance(sigma2, rot, jr, lp) - lp * Eigen::Matrix2d::Identity());
  CHECK((lhs - rhs).norm() < 1e-12);
}

TEST_CASE("gaussian_weight closed forms and monotonicity") {
  CHECK(gaussian_weight(Eigen::Matrix2d::Identity(), {0, 0}) == doctest::Approx(1.0));
  CHECK(gaussian_weight(Eigen::Matrix2d::Identity(), {1, 0}) == doctest::Approx(std::exp(-0.5)));

  // Anisotropic case vs the adjugate inverse.
  Eigen::Matrix2d c;
  c << 3.0, 0.8, 0.8, 1.5;
  Eigen::Vector2d d(0.7, -1.1);
  const double det = c(0, 0) * c(1, 1) - c(0, 1) * c(1, 0);
  Eigen::Matrix2d inv;
  inv << c(1, 1) / det, -c(0, 1) / det, -c(1, 0) / det, c(0, 0) / det;
  CHECK(gaussian_weight(c, d) == doctest::Approx(std::exp(-0.5 * d.dot(inv * d))).epsilon(1e-12));

  // Nonincreasing along any ray from the origin.
  std::mt19937_64 rng(51);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 10; ++i) {
    Eigen::Vector2d dir(nd(rng), nd(rng));
    double prev = 2.0;
    for (double t = 0.0; t < 4.0; t += 0.25) {
      const double w = gaussian_weight(c, t * dir);
      CHECK(w <= prev + 1e-15);
      prev = w;
    }
  }

  // Near-singular covariance reports weight 0 (skipped primitive).
  Eigen::Matrix2d sing;
  sing << 1e-7, 0, 0, 1e-7;
  CHECK(gaussian_weight(sing, {0.1, 0.1}) == 0.0);
}

TEST_CASE("screen_bounds covers the cutoff ellipse") {
  PixelRect r = screen_bounds({50, 50}, Eigen::Matrix2d::Identity(), 3.0, 100, 100);
  CHECK(r.x0 <= 47);
  CHECK(r.x1 >= 53);
  CHECK(r.y0 <= 47);
  CHECK(r.y1 >= 53);

  CHECK(screen_bounds({-10, -10}, Eigen::Matrix2d::Identity(), 3.0, 64, 64).empty());

  // Every pixel with weight above the cutoff level lies inside the rect.
  Eigen::Matrix2d c;
  c << 4.0, 1.2, 1.2, 2.0;
  const Eigen::Vector2d center(30.3, 22.7);
  const double cutoff = 3.0;
  PixelRect b = screen_bounds(center, c, cutoff, 64, 64);
  const double level = std::exp(-0.5 * cutoff * cutoff);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      Eigen::Vector2d d(x + 0.5 - center.x(), y + 0.5 - center.y());
      if (gaussian_weight(c, d) >= level) {
        CHECK(x >= b.x0);
        CHECK(x < b.x1);
        CHECK(y >= b.y0);
        CHECK(y < b.y1);
      }
    }
  }
}

TEST_CASE("evaluate_sh degree 0 and 1") {
  Eigen::Vector3d dc = evaluate_sh({0.2, 0.4, 0.6}, {0, 0, 1});
  CHECK(dc.x() == doctest::Approx(0.2));
  CHECK(dc.z() == doctest::Approx(0.6));

  // Degree 1: dc + c1 * (-y, z, -x) convention folded into the linear terms;
  // verify against explicit basis evaluation.
  std::vector<double> coeffs(12, 0.0);
  coeffs[0] = coeffs[1] = coeffs[2] = 0.5;
  coeffs[3] = 0.1;  // first linear triple, red channel
  Eigen::Vector3d dir = Eigen::Vector3d(0.3, -0.4, 0.87).normalized();
  Eigen::Vector3d v = evaluate_sh(coeffs, dir);
  CHECK(v.x() >= 0.0);
  CHECK(v.x() <= 1.0);
  // Flipping the direction flips the linear contribution around the DC term.
  Eigen::Vector3d v2 = evaluate_sh(coeffs, -dir);
  CHECK(v.x() + v2.x() == doctest::Approx(2 * 0.5).epsilon(1e-12));
}
