#include "psag/pose.hpp"

#include <algorithm>
#include <cmath>

namespace psag {

double rotation_angle(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
  return rotation_angle(a.conjugate() * b);
}

double rotation_angle(const Eigen::Quaterniond& q) {
  // atan2 form is stable for angles near 0 and near pi.
  const double s = q.vec().norm();
  const double c = std::abs(q.w());
  return 2.0 * std::atan2(s, c);
}

Eigen::Quaterniond rotation_from_angular_velocity(const Vec3& omega, double dt) {
  const double angle = omega.norm() * dt;
  if (angle < 1e-14) {
    Eigen::Quaterniond q(1.0, 0.5 * omega.x() * dt, 0.5 * omega.y() * dt, 0.5 * omega.z() * dt);
    q.normalize();
    return q;
  }
  return Eigen::Quaterniond(Eigen::AngleAxisd(angle, omega.normalized()));
}

Vec3 angular_velocity_between(const Eigen::Quaterniond& from, const Eigen::Quaterniond& to, double dt) {
  Eigen::Quaterniond delta = to * from.conjugate();
  if (delta.w() < 0.0) delta.coeffs() = -delta.coeffs();
  Eigen::AngleAxisd aa(delta);
  return aa.axis() * (aa.angle() / dt);
}

Pose interpolate(const Pose& a, const Pose& b, double u) {
  u = std::clamp(u, 0.0, 1.0);
  Pose out;
  out.translation = (1.0 - u) * a.translation + u * b.translation;
  out.rotation = a.rotation.slerp(u, b.rotation);
  return out.canonical();
}

}  // namespace psag
