#pragma once

#include <cstdint>
#include <limits>
#include <unordered_map>
#include <vector>

#include "psag/common.hpp"

namespace psag {

/// Uniform-grid hash over a fixed point set. Nearest/radius queries are
/// exact: cells are visited in expanding Chebyshev shells and the search
/// stops only once the shell's distance lower bound exceeds the best hit.
class SpatialHashIndex {
 public:
  SpatialHashIndex() = default;
  SpatialHashIndex(const std::vector<Vec3>& points, double cell_size);

  /// Index and squared distance of the exact nearest neighbor, or
  /// {-1, inf} if the set is empty or nothing lies within `max_dist`
  /// (pass +inf for an unbounded search).
  struct Hit {
    std::int64_t index = -1;
    double dist_sq = std::numeric_limits<double>::infinity();
  };
  Hit nearest(const Vec3& query, double max_dist) const;

  /// All indices with |p - query| <= radius.
  void within(const Vec3& query, double radius, std::vector<std::int64_t>& out) const;

  std::size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }
  double cell_size() const { return cell_; }

 private:
  struct Key {
    std::int64_t x, y, z;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::uint64_t h = 1469598103934665603ULL;
      auto mix = [&h](std::int64_t v) {
        h ^= static_cast<std::uint64_t>(v);
        h *= 1099511628211ULL;
      };
      mix(k.x);
      mix(k.y);
      mix(k.z);
      return static_cast<std::size_t>(h);
    }
  };

  Key key_of(const Vec3& p) const;

  std::vector<Vec3> points_;
  double cell_ = 1.0;
  Key key_min_{0, 0, 0};
  Key key_max_{0, 0, 0};
  std::unordered_map<Key, std::vector<std::int64_t>, KeyHash> cells_;
};

/// Cell size heuristic for a cloud: mean spacing estimate from the bounding
/// box, clamped to a sane range.
double suggest_cell_size(const std::vector<Vec3>& points);

}  // namespace psag
