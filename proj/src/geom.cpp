#include "anchorpose/geom.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <sstream>

#include "anchorpose/error.hpp"

namespace anchorpose {

namespace {

double orthonormality_error(const Mat3& m) {
  return (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
}

}  // namespace

bool Pose::is_valid(double tol) const {
  return orthonormality_error(rotation) < tol &&
         std::abs(rotation.determinant() - 1.0) < tol &&
         translation.allFinite();
}

Mat3 Intrinsics::matrix() const {
  Mat3 k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Mat3 CropAffine::matrix() const {
  Mat3 a;
  a << scale_u, 0.0, offset_u, 0.0, scale_v, offset_v, 0.0, 0.0, 1.0;
  return a;
}

Vec2 project(const Vec3& point, const Pose& pose, const Intrinsics& k) {
  const Vec3 pc = pose.apply(point);
  if (!(pc.z() > kNearPlane)) {
    std::ostringstream msg;
    msg << "camera-frame depth " << pc.z() << " is not in front of the camera";
    throw Error(ErrorCode::kPointBehindCamera, msg.str());
  }
  return {k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy};
}

Vec3 backproject(double u, double v, double depth, const Intrinsics& k) {
  if (!(depth > 0.0)) {
    throw Error(ErrorCode::kNonPositiveDepth,
                "depth must be positive, got " + std::to_string(depth));
  }
  return {(u - k.cx) * depth / k.fx, (v - k.cy) * depth / k.fy, depth};
}

Mat3 rot6d_to_matrix(const Rot6D& r) {
  const double n1 = r.a1.norm();
  if (!(n1 > 1e-12)) {
    throw Error(ErrorCode::kDegenerateFrame, "first column has zero length");
  }
  const Vec3 b1 = r.a1 / n1;
  if (!(b1.cross(r.a2).norm() > 1e-12)) {
    throw Error(ErrorCode::kDegenerateFrame, "columns are parallel");
  }
  Vec3 u = r.a2 - b1.dot(r.a2) * b1;
  // A second pass restores orthogonality lost to cancellation when a2 is
  // nearly parallel to a1.
  u -= b1.dot(u) * b1;
  const Vec3 b2 = u.normalized();
  Mat3 m;
  m.col(0) = b1;
  m.col(1) = b2;
  m.col(2) = b1.cross(b2);
  return m;
}

Rot6D matrix_to_rot6d(const Mat3& m) {
  if (!(orthonormality_error(m) < 1e-6) ||
      !(std::abs(m.determinant() - 1.0) < 1e-6)) {
    throw Error(ErrorCode::kNotARotation,
                "matrix is not a proper rotation (orthonormality or det)");
  }
  return {m.col(0), m.col(1)};
}

Pose pose_compose(const Pose& a, const Pose& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

Pose pose_inverse(const Pose& a) {
  const Mat3 rt = a.rotation.transpose();
  return {rt, -(rt * a.translation)};
}

Mat3 axis_angle(const Vec3& axis, double angle_rad) {
  return Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix();
}

}  // namespace anchorpose
