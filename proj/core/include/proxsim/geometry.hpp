/// Small planar/3-D geometry helpers shared across the library.
#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace proxsim {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Wrap an angle into (-pi, pi].
inline double wrap_angle(double a) {
  double y = std::fmod(a + M_PI, 2.0 * M_PI);
  if (y <= 0.0) y += 2.0 * M_PI;
  return y - M_PI;
}

/// Planar rotation matrix, world_from_body for a heading angle.
inline Mat2 rot2(double psi) {
  const double c = std::cos(psi), s = std::sin(psi);
  Mat2 r;
  r << c, -s, s, c;
  return r;
}

/// d/dpsi of rot2(psi).
inline Mat2 rot2_deriv(double psi) {
  const double c = std::cos(psi), s = std::sin(psi);
  Mat2 r;
  r << -s, -c, c, -s;
  return r;
}

/// Planar cross-product matrix for scalar rate w: [w]x * v = w * perp(v).
inline Mat2 planar_skew(double w) {
  Mat2 r;
  r << 0.0, -w, w, 0.0;
  return r;
}

/// 3-D skew-symmetric matrix.
inline Mat3 skew3(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

/// Rotation matrix from a scalar-last quaternion q = (x, y, z, w).
/// Plain polynomial expression in the raw coefficients (orthonormal only for
/// unit q); callers that need an orthonormal result must normalize first.
inline Mat3 quat_to_rot(const Vec4& q) {
  const double x = q(0), y = q(1), z = q(2), w = q(3);
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
      2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
      2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y);
  return r;
}

/// Partial derivative of quat_to_rot with respect to coefficient k (0..3),
/// evaluated for a unit quaternion (the renormalized-EKF convention).
inline Mat3 quat_to_rot_deriv(const Vec4& q, int k) {
  const double x = q(0), y = q(1), z = q(2), w = q(3);
  Mat3 d;
  switch (k) {
    case 0:
      d << 0, y, z, y, -2 * x, -w, z, w, -2 * x;
      break;
    case 1:
      d << -2 * y, x, w, x, 0, z, -w, z, -2 * y;
      break;
    case 2:
      d << -2 * z, -w, x, w, -2 * z, y, x, y, 0;
      break;
    default:
      d << 0, -z, y, z, 0, -x, -y, x, 0;
      break;
  }
  return 2.0 * d;
}

/// Scalar-last unit quaternion from a rotation matrix.
inline Vec4 rot_to_quat(const Mat3& r) {
  Eigen::Quaterniond q(r);
  q.normalize();
  if (q.w() < 0) q.coeffs() *= -1.0;  // canonical sign
  return q.coeffs();                  // (x, y, z, w)
}

/// Planar rigid transform, world_from_body unless stated otherwise.
struct PlanarPose {
  Vec2 position{Vec2::Zero()};
  double heading{0.0};

  Vec2 apply(const Vec2& p) const { return position + rot2(heading) * p; }
  PlanarPose compose(const PlanarPose& other) const {
    return {position + rot2(heading) * other.position, wrap_angle(heading + other.heading)};
  }
  PlanarPose inverse() const {
    return {-(rot2(heading).transpose() * position), wrap_angle(-heading)};
  }
};

/// Angle of the geodesic between two rotations.
inline double rotation_angle_between(const Mat3& a, const Mat3& b) {
  const double c = ((a.transpose() * b).trace() - 1.0) / 2.0;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

}  // namespace proxsim
