#pragma once

#include <Eigen/Geometry>

#include "psag/common.hpp"

namespace psag {

/// Rigid transform: rotation (unit quaternion, w >= 0 canonical sign)
/// followed by translation. apply(p) = q * p + t.
struct Pose {
  Vec3 translation = Vec3::Zero();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();

  static Pose identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  Pose inverse() const {
    Eigen::Quaterniond qi = rotation.conjugate();
    return Pose{-(qi * translation), qi}.canonical();
  }

  /// this * other: apply `other` first, then `this`.
  Pose operator*(const Pose& other) const {
    return Pose{rotation * other.translation + translation, rotation * other.rotation}.canonical();
  }

  /// Renormalizes and flips sign so w >= 0.
  Pose canonical() const {
    Pose out = *this;
    out.rotation.normalize();
    if (out.rotation.w() < 0.0) out.rotation.coeffs() = -out.rotation.coeffs();
    return out;
  }

  bool finite() const {
    return translation.allFinite() && rotation.coeffs().allFinite();
  }
};

/// Geodesic angle between two rotations, in [0, pi].
double rotation_angle(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b);

/// Angle of a single rotation about its axis, in [0, pi].
double rotation_angle(const Eigen::Quaterniond& q);

/// Quaternion exp map: rotation by |omega|*dt about omega's axis.
Eigen::Quaterniond rotation_from_angular_velocity(const Vec3& omega, double dt);

/// Quaternion log map: angular velocity that carries `from` to `to` in dt.
Vec3 angular_velocity_between(const Eigen::Quaterniond& from, const Eigen::Quaterniond& to, double dt);

/// Linear/slerp interpolation between poses, u in [0, 1].
Pose interpolate(const Pose& a, const Pose& b, double u);

}  // namespace psag
