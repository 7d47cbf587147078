#include "kinchain/se3.hpp"

#include <cmath>
#include <stdexcept>

namespace kinchain {
namespace {

constexpr double kParallelThreshold = 1e-8;

}  // namespace

Rotation Rotation::from_matrix(const Mat3& m, double tol) {
  if (!m.allFinite()) throw std::invalid_argument("rotation matrix has non-finite entries");
  if ((m.transpose() * m - Mat3::Identity()).norm() > tol)
    throw std::invalid_argument("rotation matrix is not orthonormal");
  if (std::abs(m.determinant() - 1.0) > tol)
    throw std::invalid_argument("rotation matrix determinant is not +1");
  return Rotation(m);
}

Vec3 Rotation::log() const {
  const Eigen::AngleAxisd aa(m_);
  return aa.axis() * aa.angle();
}

Mat4 RigidTransform::homogeneous() const {
  Mat4 h = Mat4::Identity();
  h.topLeftCorner<3, 3>() = rotation.matrix();
  h.topRightCorner<3, 1>() = translation;
  return h;
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  // clang-format off
  s <<     0, -v.z(),  v.y(),
       v.z(),      0, -v.x(),
      -v.y(),  v.x(),      0;
  // clang-format on
  return s;
}

Rotation axis_angle_rotation(const Vec3& axis, double angle) {
  const double n = axis.norm();
  if (!(n > 0.0)) {
    if (angle == 0.0) return Rotation::identity();
    throw std::invalid_argument("axis_angle_rotation: zero axis with nonzero angle");
  }
  const Vec3 k = axis / n;
  const Mat3 K = skew(k);
  const Mat3 R = Mat3::Identity() + std::sin(angle) * K + (1.0 - std::cos(angle)) * K * K;
  return Rotation::from_matrix_unchecked(R);
}

Rotation rotation_from_axis_angle(const Vec3& axis_angle) {
  const double angle = axis_angle.norm();
  if (angle == 0.0) return Rotation::identity();
  return axis_angle_rotation(axis_angle, angle);
}

Rotation rotation_between(const Vec3& u, const Vec3& v) {
  const double nu = u.norm();
  const double nv = v.norm();
  if (!(nu > 0.0) || !(nv > 0.0))
    throw std::invalid_argument("rotation_between: zero-length input vector");
  const Vec3 a = u / nu;
  const Vec3 b = v / nv;
  const Vec3 c = a.cross(b);
  const double s = c.norm();
  const double cos_angle = a.dot(b);

  if (s < kParallelThreshold) {
    if (cos_angle > 0.0) return Rotation::identity();
    // Anti-parallel: half turn about a perpendicular axis.
    Eigen::Index least = 0;
    a.cwiseAbs().minCoeff(&least);
    Vec3 e = Vec3::Zero();
    e[least] = 1.0;
    const Vec3 axis = (e - e.dot(a) * a).normalized();
    return Rotation::from_matrix_unchecked(2.0 * axis * axis.transpose() - Mat3::Identity());
  }

  const Vec3 k = c / s;
  const double angle = std::atan2(s, cos_angle);
  return axis_angle_rotation(k, angle);
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

RigidTransform invert(const RigidTransform& t) {
  const Rotation rt = t.rotation.inverse();
  return {rt, -(rt * t.translation)};
}

Vec3 apply_point(const RigidTransform& t, const Vec3& x) {
  return t.rotation * x + t.translation;
}

}  // namespace kinchain
