#include "psag/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace psag {

SpatialHashIndex::SpatialHashIndex(const std::vector<Vec3>& points, double cell_size)
    : points_(points), cell_(cell_size) {
  if (!(cell_ > 0.0)) throw ArgumentError("cell_size must be positive");
  cells_.reserve(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const Key k = key_of(points_[i]);
    if (i == 0) {
      key_min_ = key_max_ = k;
    } else {
      key_min_ = Key{std::min(key_min_.x, k.x), std::min(key_min_.y, k.y), std::min(key_min_.z, k.z)};
      key_max_ = Key{std::max(key_max_.x, k.x), std::max(key_max_.y, k.y), std::max(key_max_.z, k.z)};
    }
    cells_[k].push_back(static_cast<std::int64_t>(i));
  }
}

SpatialHashIndex::Key SpatialHashIndex::key_of(const Vec3& p) const {
  return Key{static_cast<std::int64_t>(std::floor(p.x() / cell_)),
             static_cast<std::int64_t>(std::floor(p.y() / cell_)),
             static_cast<std::int64_t>(std::floor(p.z() / cell_))};
}

SpatialHashIndex::Hit SpatialHashIndex::nearest(const Vec3& query, double max_dist) const {
  Hit best;
  if (points_.empty()) return best;
  const Key qk = key_of(query);
  const double max_dist_sq = max_dist * max_dist;

  // Outermost shell that can contain any indexed point at all.
  const std::int64_t cover = std::max({std::max(key_min_.x - qk.x, qk.x - key_max_.x),
                                       std::max(key_min_.y - qk.y, qk.y - key_max_.y),
                                       std::max(key_min_.z - qk.z, qk.z - key_max_.z),
                                       std::int64_t{0}});
  std::int64_t max_shell = cover + 1;
  if (std::isfinite(max_dist)) {
    max_shell = std::min(max_shell, static_cast<std::int64_t>(std::ceil(max_dist / cell_)) + 1);
  }

  auto visit = [&](std::int64_t cx, std::int64_t cy, std::int64_t cz) {
    auto it = cells_.find(Key{cx, cy, cz});
    if (it == cells_.end()) return;
    for (std::int64_t idx : it->second) {
      const double d2 = (points_[idx] - query).squaredNorm();
      if (d2 < best.dist_sq && d2 <= max_dist_sq) {
        best.dist_sq = d2;
        best.index = idx;
      }
    }
  };

  for (std::int64_t shell = 0; shell <= max_shell; ++shell) {
    // Any point in a cell at Chebyshev distance `shell` from the query cell
    // is at least (shell - 1) * cell_ away, so once the current best beats
    // that bound the search is complete.
    const double shell_lb = (shell - 1) * cell_;
    if (best.index >= 0 && shell >= 1 && best.dist_sq <= shell_lb * shell_lb) break;

    if (shell == 0) {
      visit(qk.x, qk.y, qk.z);
    } else {
      for (std::int64_t dx = -shell; dx <= shell; ++dx) {
        for (std::int64_t dy = -shell; dy <= shell; ++dy) {
          for (std::int64_t dz = -shell; dz <= shell; ++dz) {
            if (std::max({std::llabs(dx), std::llabs(dy), std::llabs(dz)}) != shell) continue;
            visit(qk.x + dx, qk.y + dy, qk.z + dz);
          }
        }
      }
    }
  }
  if (best.index >= 0 && best.dist_sq > max_dist_sq) return Hit{};
  return best;
}

void SpatialHashIndex::within(const Vec3& query, double radius, std::vector<std::int64_t>& out) const {
  out.clear();
  if (points_.empty() || !(radius >= 0.0)) return;
  const double r_sq = radius * radius;
  const Key qk = key_of(query);
  const std::int64_t reach = static_cast<std::int64_t>(std::floor(radius / cell_)) + 1;
  for (std::int64_t dx = -reach; dx <= reach; ++dx) {
    for (std::int64_t dy = -reach; dy <= reach; ++dy) {
      for (std::int64_t dz = -reach; dz <= reach; ++dz) {
        auto it = cells_.find(Key{qk.x + dx, qk.y + dy, qk.z + dz});
        if (it == cells_.end()) continue;
        for (std::int64_t idx : it->second) {
          if ((points_[idx] - query).squaredNorm() <= r_sq) out.push_back(idx);
        }
      }
    }
  }
}

double suggest_cell_size(const std::vector<Vec3>& points) {
  if (points.empty()) return 1.0;
  Vec3 lo = points.front(), hi = points.front();
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double diag = (hi - lo).norm();
  if (diag <= 0.0) return 1e-3;
  const double n = static_cast<double>(points.size());
  return std::clamp(diag / std::cbrt(n), 1e-4, diag);
}

}  // namespace psag
