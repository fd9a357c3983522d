#pragma once

#include <optional>
#include <tuple>
#include <vector>

#include "psag/pose.hpp"

namespace psag {

/// Box centered at pose.translation with local axes from pose.rotation.
/// Axis order is canonical: half_extents sorted descending, right-handed.
struct OrientedBox {
  Pose pose;
  Vec3 half_extents = Vec3::Ones();
  bool degenerate = false;  // extents were floored (collinear/coplanar input)

  double volume() const { return 8.0 * half_extents.prod(); }
  bool contains(const Vec3& p, double slack = 1e-9) const;
  /// Signed distance, negative inside.
  double sdf(const Vec3& p) const;
  /// Deterministic lattice of surface samples at roughly `spacing`.
  std::vector<Vec3> surface_samples(double spacing) const;
};

/// Minimum floor applied to degenerate box extents.
inline constexpr double kMinHalfExtent = 1e-6;

/// PCA-initialized oriented bounding box with multi-start local rotation
/// refinement. Contract: contains all inputs (1e-9 slack) and lands within
/// 1% of the volume found by an exhaustive 2-degree rotation-grid search.
OrientedBox fit_obb(const std::vector<Vec3>& points);

struct IcpParams {
  int max_iters = 30;
  double tol = 1e-7;              // stop when rmse improves less than this
  double max_corr_dist = 0.05;    // correspondence cap, meters
  double min_fitness = 0.1;       // below this -> LowOverlapError
};

struct IcpResult {
  Pose pose;                      // maps source points into the target frame
  double rmse = 0.0;              // inlier RMSE after alignment
  double fitness = 0.0;           // inlier fraction of the source cloud
  std::vector<double> rmse_trace; // per-iteration correspondence RMSE
};

/// Point-to-point ICP with an SVD (Umeyama) alignment step.
/// Throws LowOverlapError when the final inlier fraction is below
/// params.min_fitness; the caller decides whether to fall back to `init`.
IcpResult icp_refine(const std::vector<Vec3>& source, const std::vector<Vec3>& target,
                     const Pose& init, const IcpParams& params = {});

struct ClosestPair {
  std::int64_t index_a = 0;
  std::int64_t index_b = 0;
  double distance = 0.0;
};

struct ChamferResult {
  double min_distance = 0.0;
  std::vector<ClosestPair> closest_pairs;  // all pairs within min + band
};

/// Exact minimum pairwise distance (grid-accelerated, matches the O(n*m)
/// double loop bit for bit) plus every pair within min_distance + band.
ChamferResult chamfer_closest(const std::vector<Vec3>& a, const std::vector<Vec3>& b,
                              double contact_band = 0.005);

/// Normalized spatial distribution of a contact zone on a dense voxel grid.
/// grid_origin is the min corner of voxel (0,0,0); the center of voxel
/// (i,j,k) sits at grid_origin + (ijk + 0.5) * voxel_size.
struct ContactRegion {
  std::pair<int, int> anchor_pair{0, 0};
  Vec3 grid_origin = Vec3::Zero();
  double voxel_size = 0.005;
  Eigen::Vector3i dims = Eigen::Vector3i::Zero();
  std::vector<double> weights;  // dense, x-fastest, sums to 1

  double& at(int i, int j, int k) { return weights[(k * dims.y() + j) * dims.x() + i]; }
  double at(int i, int j, int k) const { return weights[(k * dims.y() + j) * dims.x() + i]; }
  Vec3 voxel_center(int i, int j, int k) const {
    return grid_origin + voxel_size * Vec3(i + 0.5, j + 0.5, k + 0.5);
  }
  double sum() const;
  Vec3 centroid() const;
  /// Translate the whole grid (used when moving between frames).
  void shift(const Vec3& delta) { grid_origin += delta; }
};

/// Splats pair midpoints (trilinear) onto a voxel grid aligned to multiples
/// of voxel_size, convolves with an isotropic Gaussian of std `sigma`
/// truncated at 3 sigma per axis, and renormalizes to sum 1.
ContactRegion smooth_contact(const std::vector<ClosestPair>& pairs,
                             const std::vector<Vec3>& points_a, const std::vector<Vec3>& points_b,
                             double voxel_size, double sigma);

/// Midpoint-list overload used when the caller already formed midpoints.
ContactRegion smooth_contact_midpoints(const std::vector<Vec3>& midpoints, double voxel_size,
                                       double sigma);

/// Accumulates `source` mass onto `target_grid`'s voxels (nearest cell by
/// world position; mass falling outside the target grid is dropped).
std::vector<double> resample_onto(const ContactRegion& source, const ContactRegion& target_grid);

/// Per-axis normalization of an object into a canonical unit cube centered
/// on its CoM proxy (point centroid). apply(): world -> canonical,
/// invert(): canonical -> world.
struct NunocsMap {
  Vec3 origin = Vec3::Zero();           // object centroid
  Vec3 per_axis_scale = Vec3::Ones();   // 1 / (2 * half_extent), canonical order
  Eigen::Quaterniond axes = Eigen::Quaterniond::Identity();
  bool degenerate = false;

  Vec3 apply(const Vec3& p) const;
  Vec3 invert(const Vec3& p) const;
  Pose apply(const Pose& p) const;   // rotation conjugated by axes only
  Pose invert(const Pose& p) const;
};

NunocsMap fit_nunocs(const std::vector<Vec3>& points);

/// Connected components of a point set, linking points within `radius`.
std::vector<std::vector<std::int64_t>> connected_components(const std::vector<Vec3>& points,
                                                            double radius);

}  // namespace psag
