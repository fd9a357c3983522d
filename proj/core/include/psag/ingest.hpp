#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "psag/common.hpp"

namespace psag {

/// One labeled point of a semantic cloud.
struct PointRecord {
  Vec3 position = Vec3::Zero();
  int instance_id = 0;
  double confidence = 1.0;
};

/// One timestamped labeled point cloud.
struct SemanticFrame {
  int frame_index = 0;
  double timestamp = 0.0;  // seconds, frame_index / frame_rate
  std::vector<PointRecord> points;

  /// Positions of all points carrying `instance_id`.
  std::vector<Vec3> cloud_of(int instance_id) const;
};

struct ObjectInfo {
  int id = 0;
  std::string name;
  std::string category;
  bool is_hand = false;
  bool is_deformable = false;
  std::string material_preset;  // empty for rigid objects
};

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
};

/// Scene description shared by demonstration and test-scene directories.
/// A demonstration manifest has exactly one hand; a test-scene manifest has
/// none. `receptacle_id` / `tool_id` are optional overrides of the automatic
/// selection rules in the graph module.
struct SceneManifest {
  std::vector<ObjectInfo> objects;
  double frame_rate = 30.0;
  Vec3 gravity = Vec3(0.0, 0.0, -9.8);
  Aabb workspace_bounds;
  std::optional<int> receptacle_id;
  std::optional<int> tool_id;

  const ObjectInfo* find(int id) const;
  const ObjectInfo& at(int id) const;  // throws ValidationError if absent
  std::optional<int> hand_id() const;
  void validate(bool demonstration) const;
};

struct Sequence {
  SceneManifest manifest;
  std::vector<SemanticFrame> frames;
  Warnings warnings;
};

SceneManifest load_manifest(const std::filesystem::path& file);
void save_manifest(const SceneManifest& manifest, const std::filesystem::path& file);

/// Reads manifest.json + frames/NNNNNN.csv from `dir`. Frames come back
/// sorted by index with timestamps derived from the frame rate. Points
/// outside the workspace bounds are dropped with a count warning. Set
/// `demonstration` to false for hand-free test scenes.
Sequence load_sequence(const std::filesystem::path& dir, bool demonstration = true);

void save_sequence(const SceneManifest& manifest, const std::vector<SemanticFrame>& frames,
                   const std::filesystem::path& dir);

/// Per-(voxel, instance) centroid pooling. Labels are preserved; confidences
/// are averaged within a cell.
SemanticFrame downsample(const SemanticFrame& frame, double voxel_size);

/// Convenience overload over a bare cloud.
std::vector<Vec3> downsample(const std::vector<Vec3>& points, double voxel_size);

}  // namespace psag
