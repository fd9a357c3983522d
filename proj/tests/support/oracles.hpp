// Independent brute-force oracles for the geometry and cost contracts.
// Everything here deliberately avoids the library's accelerated paths.
#pragma once

#include <cmath>
#include <map>
#include <random>
#include <vector>

#include <psag/geometry.hpp>

namespace oracles {

using psag::Vec3;

// O(n*m) double loop, same distance expression as the library
// (sqrt of squaredNorm) so results are bit-comparable.
inline double brute_min_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& pa : a) {
    for (const auto& pb : b) {
      best = std::min(best, std::sqrt((pa - pb).squaredNorm()));
    }
  }
  return best;
}

inline std::vector<std::tuple<std::int64_t, std::int64_t, double>> brute_pairs_within(
    const std::vector<Vec3>& a, const std::vector<Vec3>& b, double cap) {
  std::vector<std::tuple<std::int64_t, std::int64_t, double>> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double d = std::sqrt((a[i] - b[j]).squaredNorm());
      if (d <= cap) out.emplace_back(static_cast<std::int64_t>(i), static_cast<std::int64_t>(j), d);
    }
  }
  return out;
}

// Exhaustive Euler-angle sweep at `step_deg` resolution; covers SO(3) with
// margin (box symmetry makes most of it redundant, which only costs time).
inline double grid_min_obb_volume(const std::vector<Vec3>& pts, double step_deg = 2.0) {
  Eigen::Matrix3Xd centered(3, pts.size());
  Vec3 mean = Vec3::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) centered.col(i) = pts[i] - mean;

  const double step = step_deg * M_PI / 180.0;
  double best = std::numeric_limits<double>::infinity();
  for (double yaw = 0.0; yaw < 0.5 * M_PI - 1e-9; yaw += step) {
    for (double pitch = -0.5 * M_PI; pitch <= 0.5 * M_PI + 1e-9; pitch += step) {
      for (double roll = 0.0; roll < M_PI - 1e-9; roll += step) {
        const Eigen::Matrix3d rot = (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) *
                                     Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
                                     Eigen::AngleAxisd(roll, Vec3::UnitX()))
                                        .toRotationMatrix();
        const Eigen::Matrix3Xd local = rot * centered;
        const Vec3 ext = local.rowwise().maxCoeff() - local.rowwise().minCoeff();
        best = std::min(best, ext.cwiseMax(2e-6).prod());
      }
    }
  }
  return best;
}

// 2-D sweep for the planar-rectangle case: minimal area over in-plane angle.
inline double sweep_min_rect_angle(const std::vector<Vec3>& pts, double step_deg = 0.1) {
  double best_area = std::numeric_limits<double>::infinity();
  double best_angle = 0.0;
  for (double deg = 0.0; deg < 90.0; deg += step_deg) {
    const double c = std::cos(deg * M_PI / 180.0), s = std::sin(deg * M_PI / 180.0);
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& p : pts) {
      const double x = c * p.x() + s * p.y();
      const double y = -s * p.x() + c * p.y();
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
    const double area = (xmax - xmin) * (ymax - ymin);
    if (area < best_area) {
      best_area = area;
      best_angle = deg;
    }
  }
  return best_angle;
}

// Direct 3-D Gaussian evaluation over a cube support, per midpoint, then
// normalized: the definition smooth_contact must reproduce.
inline std::map<std::array<int, 3>, double> direct_gaussian_field(const std::vector<Vec3>& midpoints,
                                                                  double h, double sigma) {
  const int reach = static_cast<int>(std::ceil(3.0 * sigma / h));
  std::map<std::array<int, 3>, double> field;
  for (const auto& m : midpoints) {
    const std::array<int, 3> cell = {static_cast<int>(std::floor(m.x() / h)),
                                     static_cast<int>(std::floor(m.y() / h)),
                                     static_cast<int>(std::floor(m.z() / h))};
    for (int dz = -reach; dz <= reach; ++dz) {
      for (int dy = -reach; dy <= reach; ++dy) {
        for (int dx = -reach; dx <= reach; ++dx) {
          const double r2 = (dx * dx + dy * dy + dz * dz) * h * h;
          field[{cell[0] + dx, cell[1] + dy, cell[2] + dz}] +=
              std::exp(-0.5 * r2 / (sigma * sigma));
        }
      }
    }
  }
  double total = 0.0;
  for (const auto& [_, w] : field) total += w;
  for (auto& [_, w] : field) w /= total;
  return field;
}

// Direct-summation KL over two densities on the same support.
inline double direct_kl(const std::vector<double>& p, const std::vector<double>& q) {
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return kl;
}

// ------------------------------------------------------------- cloud makers

inline std::vector<Vec3> random_cloud(std::mt19937_64& rng, std::size_t n, const Vec3& scale,
                                      bool gaussian = false) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Vec3> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 raw = gaussian ? Vec3(g(rng), g(rng), g(rng)) : Vec3(u(rng), u(rng), u(rng));
    pts.push_back(raw.cwiseProduct(scale));
  }
  return pts;
}

inline std::vector<Vec3> transformed(const std::vector<Vec3>& pts, const psag::Pose& pose) {
  std::vector<Vec3> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(pose.apply(p));
  return out;
}

inline psag::Pose random_pose(std::mt19937_64& rng, double max_angle_rad, double max_translation) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  psag::Pose pose;
  const Vec3 axis = Vec3(u(rng), u(rng), u(rng)).normalized();
  std::uniform_real_distribution<double> ang(0.0, max_angle_rad);
  pose.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(ang(rng), axis));
  pose.translation = max_translation * Vec3(u(rng), u(rng), u(rng));
  return pose.canonical();
}

// Box-surface lattice, independent of OrientedBox::surface_samples.
inline std::vector<Vec3> box_cloud(const Vec3& half, const psag::Pose& pose, double spacing) {
  std::vector<Vec3> pts;
  const Eigen::Vector3i n(std::max(2, static_cast<int>(2.0 * half.x() / spacing)),
                          std::max(2, static_cast<int>(2.0 * half.y() / spacing)),
                          std::max(2, static_cast<int>(2.0 * half.z() / spacing)));
  for (int i = 0; i <= n.x(); ++i) {
    for (int j = 0; j <= n.y(); ++j) {
      for (int k = 0; k <= n.z(); ++k) {
        if (i != 0 && i != n.x() && j != 0 && j != n.y() && k != 0 && k != n.z()) continue;
        const Vec3 local(-half.x() + 2.0 * half.x() * i / n.x(),
                         -half.y() + 2.0 * half.y() * j / n.y(),
                         -half.z() + 2.0 * half.z() * k / n.z());
        pts.push_back(pose.apply(local));
      }
    }
  }
  return pts;
}

}  // namespace oracles
