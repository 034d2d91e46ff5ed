#pragma once

// Seeded generators for the property tests.

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "anchorpose/geom.hpp"

namespace testsupport {

using anchorpose::Mat3;
using anchorpose::Pose;
using anchorpose::Vec2;
using anchorpose::Vec3;

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vec3 random_vec(std::mt19937_64& rng, double lo, double hi) {
  return {uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi)};
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

// Axis-angle sampling: uniform axis, angle uniform in [0, pi].
inline Mat3 random_rotation(std::mt19937_64& rng) {
  return anchorpose::axis_angle(random_unit(rng), uniform(rng, 0.0, std::numbers::pi));
}

// Object 0.3 - 2 m in front of the camera, roughly inside the view.
inline Pose random_pose(std::mt19937_64& rng) {
  Pose p;
  p.rotation = random_rotation(rng);
  const double z = uniform(rng, 0.3, 2.0);
  p.translation = Vec3(uniform(rng, -0.2, 0.2) * z, uniform(rng, -0.15, 0.15) * z, z);
  return p;
}

inline std::vector<Vec3> random_cloud(std::mt19937_64& rng, std::size_t n, double half_extent) {
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back(random_vec(rng, -half_extent, half_extent));
  return pts;
}

inline double max_abs(const Mat3& m) { return m.cwiseAbs().maxCoeff(); }

inline std::vector<Vec3> cube_corners() {
  std::vector<Vec3> c;
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) {
      for (int z = 0; z < 2; ++z) c.emplace_back(x, y, z);
    }
  }
  return c;
}

}  // namespace testsupport
