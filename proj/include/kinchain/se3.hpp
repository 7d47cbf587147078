#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace kinchain {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Element of SO(3), stored as a 3x3 matrix.
class Rotation {
 public:
  Rotation() : m_(Mat3::Identity()) {}

  /// Throws std::invalid_argument unless `m` is orthonormal with det +1
  /// (Frobenius tolerance `tol`).
  static Rotation from_matrix(const Mat3& m, double tol = 1e-9);
  /// No validation; the caller guarantees orthonormality.
  static Rotation from_matrix_unchecked(const Mat3& m) { return Rotation(m); }
  static Rotation identity() { return Rotation(); }

  const Mat3& matrix() const { return m_; }
  Rotation inverse() const { return Rotation(m_.transpose()); }
  Rotation operator*(const Rotation& o) const { return Rotation(m_ * o.m_); }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }

  /// Axis-angle vector (axis * angle), angle in [0, pi].
  Vec3 log() const;

 private:
  explicit Rotation(const Mat3& m) : m_(m) {}
  Mat3 m_;
};

/// Element of SE(3): x -> R x + t.
struct RigidTransform {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Vec3& t) { return {Rotation(), t}; }
  Mat4 homogeneous() const;
};

/// Minimal-angle rotation taking unit(u) onto unit(v). Anti-parallel inputs
/// rotate by pi about the coordinate axis least aligned with u, orthogonalized.
Rotation rotation_between(const Vec3& u, const Vec3& v);

/// Rodrigues rotation about unit(axis). A zero axis is accepted only with a
/// zero angle.
Rotation axis_angle_rotation(const Vec3& axis, double angle);

/// exp map of an axis-angle vector.
Rotation rotation_from_axis_angle(const Vec3& axis_angle);

Mat3 skew(const Vec3& v);

RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& t);
Vec3 apply_point(const RigidTransform& t, const Vec3& x);

}  // namespace kinchain
