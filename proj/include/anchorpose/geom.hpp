#pragma once

#include <Eigen/Core>

namespace anchorpose {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Rigid transform from the object frame to the camera frame, in meters.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  // Orthonormality and det(R) = 1, both within `tol`.
  bool is_valid(double tol = 1e-9) const;
};

// Pinhole intrinsics. u grows rightward, v downward, pixel centers sit on
// integer coordinates.
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  Mat3 matrix() const;
};

// The affine A of a crop-and-resize: u' = scale_u * u + offset_u (same for v).
// The implied 3x3 matrix has last row [0 0 1].
struct CropAffine {
  double scale_u = 1.0;
  double scale_v = 1.0;
  double offset_u = 0.0;
  double offset_v = 0.0;

  Vec2 apply(const Vec2& uv) const {
    return {scale_u * uv.x() + offset_u, scale_v * uv.y() + offset_v};
  }
  Vec2 apply_inverse(const Vec2& uv) const {
    return {(uv.x() - offset_u) / scale_u, (uv.y() - offset_v) / scale_v};
  }
  Mat3 matrix() const;
};

// Continuous 6D rotation representation: the first two columns of R before
// Gram-Schmidt orthonormalization.
struct Rot6D {
  Vec3 a1 = Vec3::UnitX();
  Vec3 a2 = Vec3::UnitY();
};

inline constexpr double kNearPlane = 1e-9;

Vec2 project(const Vec3& point, const Pose& pose, const Intrinsics& k);

Vec3 backproject(double u, double v, double depth, const Intrinsics& k);

Mat3 rot6d_to_matrix(const Rot6D& r);

Rot6D matrix_to_rot6d(const Mat3& m);

Pose pose_compose(const Pose& a, const Pose& b);

Pose pose_inverse(const Pose& a);

// Rotation of `angle_rad` about `axis` (need not be normalized).
Mat3 axis_angle(const Vec3& axis, double angle_rad);

}  // namespace anchorpose
