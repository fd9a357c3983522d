#include "psag/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "psag/spatial_index.hpp"

namespace psag {

// ---------------------------------------------------------------- OrientedBox

bool OrientedBox::contains(const Vec3& p, double slack) const {
  const Vec3 local = pose.rotation.conjugate() * (p - pose.translation);
  return (local.cwiseAbs().array() <= half_extents.array() + slack).all();
}

double OrientedBox::sdf(const Vec3& p) const {
  const Vec3 local = pose.rotation.conjugate() * (p - pose.translation);
  const Vec3 d = local.cwiseAbs() - half_extents;
  const Vec3 outside = d.cwiseMax(0.0);
  const double inside = std::min(d.maxCoeff(), 0.0);
  return outside.norm() + inside;
}

std::vector<Vec3> OrientedBox::surface_samples(double spacing) const {
  std::vector<Vec3> out;
  auto counts = [&](double he) {
    return std::max(2, static_cast<int>(std::llround(2.0 * he / spacing)) + 1);
  };
  const int n[3] = {counts(half_extents.x()), counts(half_extents.y()), counts(half_extents.z())};
  auto coord = [&](int axis, int i) {
    return -half_extents[axis] + 2.0 * half_extents[axis] * i / (n[axis] - 1);
  };
  // Two faces per axis; interior lattice plus shared edges, deduplicated.
  std::vector<Vec3> locals;
  for (int axis = 0; axis < 3; ++axis) {
    const int u = (axis + 1) % 3, v = (axis + 2) % 3;
    for (int side = 0; side < 2; ++side) {
      const double a = side == 0 ? -half_extents[axis] : half_extents[axis];
      for (int i = 0; i < n[u]; ++i) {
        for (int j = 0; j < n[v]; ++j) {
          Vec3 q;
          q[axis] = a;
          q[u] = coord(u, i);
          q[v] = coord(v, j);
          locals.push_back(q);
        }
      }
    }
  }
  std::sort(locals.begin(), locals.end(), [](const Vec3& a, const Vec3& b) {
    return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
  });
  locals.erase(std::unique(locals.begin(), locals.end(),
                           [](const Vec3& a, const Vec3& b) { return (a - b).norm() < 1e-12; }),
               locals.end());
  out.reserve(locals.size());
  for (const auto& q : locals) out.push_back(pose.apply(q));
  return out;
}

// -------------------------------------------------------------------- fit_obb

namespace {

using Mat3X = Eigen::Matrix<double, 3, Eigen::Dynamic>;

// Volume of the axis-aligned box of R * P, plus its local min/max.
double box_volume(const Mat3& rot, const Mat3X& centered, Vec3* lo_out = nullptr,
                  Vec3* hi_out = nullptr) {
  const Mat3X local = rot * centered;
  const Vec3 lo = local.rowwise().minCoeff();
  const Vec3 hi = local.rowwise().maxCoeff();
  if (lo_out) *lo_out = lo;
  if (hi_out) *hi_out = hi;
  const Vec3 ext = (hi - lo).cwiseMax(2.0 * kMinHalfExtent);
  return ext.prod();
}

Mat3 euler_rotation(double yaw, double pitch, double roll) {
  return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
          Eigen::AngleAxisd(roll, Vec3::UnitX()))
      .toRotationMatrix();
}

// Pattern search over left-multiplied axis rotations, shrinking step size.
// Left-multiplication keeps the search equivariant: rotating the input cloud
// rotates the whole search trajectory with it.
double refine_rotation(Mat3& rot, const Mat3X& centered, double step0, double step_min) {
  double best = box_volume(rot, centered);
  for (double step = step0; step >= step_min; step *= 0.5) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (int axis = 0; axis < 3; ++axis) {
        for (double sign : {1.0, -1.0}) {
          const Mat3 cand =
              Eigen::AngleAxisd(sign * step, Vec3::Unit(axis)).toRotationMatrix() * rot;
          const double v = box_volume(cand, centered);
          if (v < best * (1.0 - 1e-12)) {
            best = v;
            rot = cand;
            improved = true;
          }
        }
      }
    }
  }
  return best;
}

}  // namespace

OrientedBox fit_obb(const std::vector<Vec3>& points) {
  if (points.empty()) throw ArgumentError("fit_obb needs at least one point");
  const std::size_t n = points.size();

  Vec3 mean = Vec3::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(n);

  Mat3X centered(3, n);
  for (std::size_t i = 0; i < n; ++i) centered.col(i) = points[i] - mean;

  // PCA initialization.
  const Mat3 cov = centered * centered.transpose() / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Mat3> es;
  es.computeDirect(cov);
  Mat3 pca = es.eigenvectors().transpose();
  if (pca.determinant() < 0.0) pca.row(2) = -pca.row(2);

  // Multi-start: PCA, identity, and the best coarse-grid orientations.
  std::vector<Mat3> starts = {pca, Mat3::Identity()};
  {
    struct Scored {
      double vol;
      Mat3 rot;
    };
    std::vector<Scored> grid;
    const double step = 15.0 * M_PI / 180.0;
    for (double yaw = 0.0; yaw < 0.5 * M_PI - 1e-9; yaw += step) {
      for (double pitch = -0.5 * M_PI; pitch <= 0.5 * M_PI + 1e-9; pitch += step) {
        for (double roll = 0.0; roll < M_PI - 1e-9; roll += step) {
          Mat3 rot = euler_rotation(yaw, pitch, roll);
          grid.push_back({box_volume(rot, centered), rot});
        }
      }
    }
    std::partial_sort(grid.begin(), grid.begin() + std::min<std::size_t>(6, grid.size()),
                      grid.end(), [](const Scored& a, const Scored& b) { return a.vol < b.vol; });
    for (std::size_t i = 0; i < std::min<std::size_t>(6, grid.size()); ++i) {
      starts.push_back(grid[i].rot);
    }
  }

  Mat3 best_rot = starts.front();
  double best_vol = std::numeric_limits<double>::infinity();
  for (Mat3 rot : starts) {
    const double v = refine_rotation(rot, centered, 0.26, 0.0015);
    if (v < best_vol) {
      best_vol = v;
      best_rot = rot;
    }
  }

  Vec3 lo, hi;
  box_volume(best_rot, centered, &lo, &hi);
  Vec3 he = 0.5 * (hi - lo);
  const Vec3 center_local = 0.5 * (hi + lo);

  // Canonical axis order: half-extents descending. Ties keep axis index order.
  std::array<int, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return he[a] > he[b]; });

  Mat3 axes;  // rows = box axes in world coordinates
  Vec3 he_sorted, center_sorted;
  for (int k = 0; k < 3; ++k) {
    axes.row(k) = best_rot.row(order[k]);
    he_sorted[k] = he[order[k]];
    center_sorted[k] = center_local[order[k]];
  }

  // Cloud-relative sign canonicalization for axes 0 and 1 (third moment,
  // falling back to the farthest point), axis 2 fixed by handedness.
  const Vec3 center_world = mean + best_rot.transpose() * center_local;
  for (int k = 0; k < 2; ++k) {
    const Vec3 a = axes.row(k).transpose();
    double moment = 0.0;
    double far_proj = 0.0;
    for (const auto& p : points) {
      const double t = a.dot(p - center_world);
      moment += t * t * t;
      if (std::abs(t) > std::abs(far_proj)) far_proj = t;
    }
    double pick = std::abs(moment) > 1e-12 * static_cast<double>(n) ? moment : far_proj;
    if (pick < 0.0) {
      axes.row(k) = -axes.row(k);
      center_sorted[k] = -center_sorted[k];
    }
  }
  {
    const Vec3 a2 = axes.row(0).transpose().cross(axes.row(1).transpose());
    if (a2.dot(axes.row(2).transpose()) < 0.0) {
      axes.row(2) = -axes.row(2);
      center_sorted[2] = -center_sorted[2];
    }
  }

  OrientedBox box;
  box.pose.translation = mean + axes.transpose() * center_sorted;
  box.pose.rotation = Eigen::Quaterniond(axes.transpose());
  box.pose = box.pose.canonical();
  box.degenerate = (he_sorted.array() < kMinHalfExtent).any() || n < 4;
  box.half_extents = he_sorted.cwiseMax(kMinHalfExtent);
  return box;
}

// ----------------------------------------------------------------- icp_refine

IcpResult icp_refine(const std::vector<Vec3>& source, const std::vector<Vec3>& target,
                     const Pose& init, const IcpParams& params) {
  if (source.empty() || target.empty()) throw ArgumentError("icp_refine needs non-empty clouds");
  if (!(params.tol > 0.0)) throw ArgumentError("icp tol must be positive");

  const double cell = std::min(params.max_corr_dist, suggest_cell_size(target) * 2.0);
  SpatialHashIndex index(target, cell);

  IcpResult result;
  result.pose = init.canonical();

  Eigen::Matrix3Xd src(3, source.size());
  for (std::size_t i = 0; i < source.size(); ++i) src.col(i) = source[i];

  std::vector<std::int64_t> match(source.size());
  double prev_rmse = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < params.max_iters; ++iter) {
    // Correspondences under the current pose.
    std::size_t inliers = 0;
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < source.size(); ++i) {
      const Vec3 moved = result.pose.apply(source[i]);
      const auto hit = index.nearest(moved, params.max_corr_dist);
      match[i] = hit.index;
      if (hit.index >= 0) {
        ++inliers;
        sum_sq += hit.dist_sq;
      }
    }
    result.fitness = static_cast<double>(inliers) / static_cast<double>(source.size());
    if (inliers < 3) break;

    const double rmse = std::sqrt(sum_sq / static_cast<double>(inliers));
    result.rmse_trace.push_back(rmse);
    result.rmse = rmse;
    if (prev_rmse - rmse < params.tol && iter > 0) break;
    prev_rmse = rmse;

    Eigen::Matrix3Xd a(3, inliers), b(3, inliers);
    std::size_t k = 0;
    for (std::size_t i = 0; i < source.size(); ++i) {
      if (match[i] < 0) continue;
      a.col(k) = source[i];
      b.col(k) = target[static_cast<std::size_t>(match[i])];
      ++k;
    }
    const Eigen::Matrix4d t = Eigen::umeyama(a, b, false);
    Pose next;
    next.rotation = Eigen::Quaterniond(Mat3(t.topLeftCorner<3, 3>()));
    next.translation = t.topRightCorner<3, 1>();
    result.pose = next.canonical();
  }

  // Final inlier RMSE under the returned pose.
  {
    std::size_t inliers = 0;
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < source.size(); ++i) {
      const auto hit = index.nearest(result.pose.apply(source[i]), params.max_corr_dist);
      if (hit.index >= 0) {
        ++inliers;
        sum_sq += hit.dist_sq;
      }
    }
    result.fitness = static_cast<double>(inliers) / static_cast<double>(source.size());
    result.rmse = inliers > 0 ? std::sqrt(sum_sq / static_cast<double>(inliers)) : 0.0;
    if (result.rmse_trace.empty() || inliers > 0) result.rmse_trace.push_back(result.rmse);
  }

  if (result.fitness < params.min_fitness) {
    throw LowOverlapError("icp fitness " + std::to_string(result.fitness) + " below " +
                          std::to_string(params.min_fitness));
  }
  return result;
}

// ------------------------------------------------------------ chamfer_closest

ChamferResult chamfer_closest(const std::vector<Vec3>& a, const std::vector<Vec3>& b,
                              double contact_band) {
  if (a.empty() || b.empty()) throw ArgumentError("chamfer_closest needs non-empty clouds");

  SpatialHashIndex index(b, suggest_cell_size(b));

  ChamferResult result;
  double min_sq = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto hit = index.nearest(a[i], std::numeric_limits<double>::infinity());
    if (hit.dist_sq < min_sq) min_sq = hit.dist_sq;
  }
  result.min_distance = std::sqrt(min_sq);

  const double cap = result.min_distance + contact_band;
  std::vector<std::int64_t> hits;
  for (std::size_t i = 0; i < a.size(); ++i) {
    index.within(a[i], cap, hits);
    for (std::int64_t j : hits) {
      const double d = std::sqrt((a[i] - b[static_cast<std::size_t>(j)]).squaredNorm());
      if (d <= cap) {
        result.closest_pairs.push_back({static_cast<std::int64_t>(i), j, d});
      }
    }
  }
  std::sort(result.closest_pairs.begin(), result.closest_pairs.end(),
            [](const ClosestPair& x, const ClosestPair& y) {
              return std::tie(x.index_a, x.index_b) < std::tie(y.index_a, y.index_b);
            });
  return result;
}

// -------------------------------------------------------------- ContactRegion

double ContactRegion::sum() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

Vec3 ContactRegion::centroid() const {
  Vec3 c = Vec3::Zero();
  double total = 0.0;
  for (int k = 0; k < dims.z(); ++k) {
    for (int j = 0; j < dims.y(); ++j) {
      for (int i = 0; i < dims.x(); ++i) {
        const double w = at(i, j, k);
        if (w > 0.0) {
          c += w * voxel_center(i, j, k);
          total += w;
        }
      }
    }
  }
  return total > 0.0 ? Vec3(c / total) : grid_origin;
}

ContactRegion smooth_contact_midpoints(const std::vector<Vec3>& midpoints, double voxel_size,
                                       double sigma) {
  if (midpoints.empty()) throw ArgumentError("smooth_contact needs at least one pair");
  if (!(voxel_size > 0.0) || !(sigma > 0.0)) {
    throw ArgumentError("voxel_size and sigma must be positive");
  }

  const double h = voxel_size;
  const int reach = static_cast<int>(std::ceil(3.0 * sigma / h));

  Vec3 lo = midpoints.front(), hi = midpoints.front();
  for (const auto& m : midpoints) {
    lo = lo.cwiseMin(m);
    hi = hi.cwiseMax(m);
  }

  ContactRegion region;
  region.voxel_size = h;
  // Grid aligned to multiples of h so identical midpoints always land in
  // identically-placed voxels; padded for splat support and kernel reach.
  Eigen::Vector3i lo_cell, hi_cell;
  for (int d = 0; d < 3; ++d) {
    lo_cell[d] = static_cast<int>(std::floor(lo[d] / h)) - (reach + 1);
    hi_cell[d] = static_cast<int>(std::floor(hi[d] / h)) + (reach + 2);
  }
  region.grid_origin = Vec3(lo_cell.x() * h, lo_cell.y() * h, lo_cell.z() * h);
  region.dims = hi_cell - lo_cell + Eigen::Vector3i::Ones();
  region.weights.assign(static_cast<std::size_t>(region.dims.prod()), 0.0);

  // Trilinear splat onto voxel centers.
  for (const auto& m : midpoints) {
    const Vec3 u = (m - region.grid_origin) / h - Vec3::Constant(0.5);
    const Eigen::Vector3i base(static_cast<int>(std::floor(u.x())),
                               static_cast<int>(std::floor(u.y())),
                               static_cast<int>(std::floor(u.z())));
    const Vec3 f = u - base.cast<double>();
    for (int dz = 0; dz < 2; ++dz) {
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const double w = (dx ? f.x() : 1.0 - f.x()) * (dy ? f.y() : 1.0 - f.y()) *
                           (dz ? f.z() : 1.0 - f.z());
          region.at(base.x() + dx, base.y() + dy, base.z() + dz) += w;
        }
      }
    }
  }

  // Separable Gaussian, truncated at 3 sigma per axis.
  std::vector<double> kernel(2 * reach + 1);
  for (int i = -reach; i <= reach; ++i) {
    kernel[i + reach] = std::exp(-0.5 * (i * h) * (i * h) / (sigma * sigma));
  }
  const auto& dims = region.dims;
  std::vector<double> tmp(region.weights.size());
  for (int axis = 0; axis < 3; ++axis) {
    std::fill(tmp.begin(), tmp.end(), 0.0);
    const int stride[3] = {1, dims.x(), dims.x() * dims.y()};
    const int s = stride[axis];
    const int extent = dims[axis];
    const int plane_a = (axis + 1) % 3, plane_b = (axis + 2) % 3;
    for (int pb = 0; pb < dims[plane_b]; ++pb) {
      for (int pa = 0; pa < dims[plane_a]; ++pa) {
        const int base = pa * stride[plane_a] + pb * stride[plane_b];
        for (int i = 0; i < extent; ++i) {
          const double v = region.weights[base + i * s];
          if (v == 0.0) continue;
          const int j0 = std::max(0, i - reach), j1 = std::min(extent - 1, i + reach);
          for (int j = j0; j <= j1; ++j) {
            tmp[base + j * s] += v * kernel[j - i + reach];
          }
        }
      }
    }
    region.weights.swap(tmp);
  }

  const double total = region.sum();
  if (!(total > 0.0)) throw NumericalError("contact region has zero mass");
  for (auto& w : region.weights) w /= total;

  // Numerically irrelevant tail cells bloat the sparse serialization; drop
  // them and renormalize, then trim all-zero boundary planes.
  constexpr double kTailCutoff = 1e-7;
  for (auto& w : region.weights) {
    if (w < kTailCutoff) w = 0.0;
  }
  const double kept = region.sum();
  if (!(kept > 0.0)) throw NumericalError("contact region has zero mass");
  for (auto& w : region.weights) w /= kept;

  Eigen::Vector3i lo_keep = region.dims, hi_keep = Eigen::Vector3i::Constant(-1);
  for (int k = 0; k < region.dims.z(); ++k) {
    for (int j = 0; j < region.dims.y(); ++j) {
      for (int i = 0; i < region.dims.x(); ++i) {
        if (region.at(i, j, k) > 0.0) {
          lo_keep = lo_keep.cwiseMin(Eigen::Vector3i(i, j, k));
          hi_keep = hi_keep.cwiseMax(Eigen::Vector3i(i, j, k));
        }
      }
    }
  }
  if ((lo_keep.array() > Eigen::Array3i::Zero()).any() ||
      (hi_keep.array() < region.dims.array() - 1).any()) {
    ContactRegion trimmed;
    trimmed.anchor_pair = region.anchor_pair;
    trimmed.voxel_size = h;
    trimmed.grid_origin = region.grid_origin + h * lo_keep.cast<double>();
    trimmed.dims = hi_keep - lo_keep + Eigen::Vector3i::Ones();
    trimmed.weights.assign(static_cast<std::size_t>(trimmed.dims.prod()), 0.0);
    for (int k = 0; k < trimmed.dims.z(); ++k) {
      for (int j = 0; j < trimmed.dims.y(); ++j) {
        for (int i = 0; i < trimmed.dims.x(); ++i) {
          trimmed.at(i, j, k) = region.at(i + lo_keep.x(), j + lo_keep.y(), k + lo_keep.z());
        }
      }
    }
    return trimmed;
  }
  return region;
}

ContactRegion smooth_contact(const std::vector<ClosestPair>& pairs, const std::vector<Vec3>& points_a,
                             const std::vector<Vec3>& points_b, double voxel_size, double sigma) {
  if (pairs.empty()) throw ArgumentError("smooth_contact needs at least one pair");
  std::vector<Vec3> midpoints;
  midpoints.reserve(pairs.size());
  for (const auto& pr : pairs) {
    midpoints.push_back(0.5 * (points_a[static_cast<std::size_t>(pr.index_a)] +
                               points_b[static_cast<std::size_t>(pr.index_b)]));
  }
  return smooth_contact_midpoints(midpoints, voxel_size, sigma);
}

std::vector<double> resample_onto(const ContactRegion& source, const ContactRegion& target_grid) {
  std::vector<double> out(static_cast<std::size_t>(target_grid.dims.prod()), 0.0);
  const double h = target_grid.voxel_size;
  for (int k = 0; k < source.dims.z(); ++k) {
    for (int j = 0; j < source.dims.y(); ++j) {
      for (int i = 0; i < source.dims.x(); ++i) {
        const double w = source.at(i, j, k);
        if (w <= 0.0) continue;
        const Vec3 x = source.voxel_center(i, j, k) - target_grid.grid_origin;
        const int ti = static_cast<int>(std::floor(x.x() / h));
        const int tj = static_cast<int>(std::floor(x.y() / h));
        const int tk = static_cast<int>(std::floor(x.z() / h));
        if (ti < 0 || tj < 0 || tk < 0 || ti >= target_grid.dims.x() ||
            tj >= target_grid.dims.y() || tk >= target_grid.dims.z()) {
          continue;  // mass outside the common grid is dropped
        }
        out[(static_cast<std::size_t>(tk) * target_grid.dims.y() + tj) * target_grid.dims.x() + ti] += w;
      }
    }
  }
  return out;
}

// ------------------------------------------------------------------- NunocsMap

Vec3 NunocsMap::apply(const Vec3& p) const {
  return (axes.conjugate() * (p - origin)).cwiseProduct(per_axis_scale);
}

Vec3 NunocsMap::invert(const Vec3& p) const {
  return axes * p.cwiseQuotient(per_axis_scale) + origin;
}

Pose NunocsMap::apply(const Pose& p) const {
  return Pose{apply(p.translation), axes.conjugate() * p.rotation}.canonical();
}

Pose NunocsMap::invert(const Pose& p) const {
  return Pose{invert(p.translation), axes * p.rotation}.canonical();
}

NunocsMap fit_nunocs(const std::vector<Vec3>& points) {
  if (points.empty()) throw ArgumentError("fit_nunocs needs at least one point");
  const OrientedBox box = fit_obb(points);
  NunocsMap map;
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : points) centroid += p;
  map.origin = centroid / static_cast<double>(points.size());
  map.axes = box.pose.rotation;
  map.per_axis_scale = (2.0 * box.half_extents).cwiseInverse();
  map.degenerate = box.degenerate;
  return map;
}

// -------------------------------------------------------- connected components

std::vector<std::vector<std::int64_t>> connected_components(const std::vector<Vec3>& points,
                                                            double radius) {
  std::vector<std::vector<std::int64_t>> comps;
  if (points.empty()) return comps;
  SpatialHashIndex index(points, std::max(radius, 1e-9));
  std::vector<int> label(points.size(), -1);
  std::vector<std::int64_t> stack, neighbors;
  int next_label = 0;
  for (std::size_t seed = 0; seed < points.size(); ++seed) {
    if (label[seed] >= 0) continue;
    label[seed] = next_label;
    comps.emplace_back();
    stack.assign(1, static_cast<std::int64_t>(seed));
    while (!stack.empty()) {
      const std::int64_t cur = stack.back();
      stack.pop_back();
      comps.back().push_back(cur);
      index.within(points[static_cast<std::size_t>(cur)], radius, neighbors);
      for (std::int64_t nb : neighbors) {
        if (label[static_cast<std::size_t>(nb)] < 0) {
          label[static_cast<std::size_t>(nb)] = next_label;
          stack.push_back(nb);
        }
      }
    }
    ++next_label;
  }
  return comps;
}

}  // namespace psag
