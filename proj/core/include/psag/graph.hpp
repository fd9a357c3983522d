#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "psag/geometry.hpp"
#include "psag/ingest.hpp"

namespace psag {

/// Force/torque observation attached to a contact edge after simulation.
struct WrenchSample {
  Vec3 force = Vec3::Zero();    // newtons
  Vec3 torque = Vec3::Zero();   // newton-meters, about the applier's CoM
  int applied_by = -1;          // instance id of the actuator
};

/// Object node of one graph frame. Poses are expressed in the receptacle
/// frame of that frame.
struct PsagNode {
  int instance_id = 0;
  std::string category;
  Pose pose;
  OrientedBox obb;
  NunocsMap nunocs;
  bool is_deformable = false;
  bool occluded = false;
  int target_parts = 1;  // connected components observed in this frame
};

/// Unordered contact relationship between two nodes.
struct PsagEdge {
  int a = 0;
  int b = 0;  // normalized so a < b
  ContactRegion contact;
  std::optional<WrenchSample> wrench;

  bool connects(int x, int y) const { return (a == x && b == y) || (a == y && b == x); }
};

struct Psag {
  int frame_index = 0;
  double timestamp = 0.0;
  std::vector<PsagNode> nodes;
  std::vector<PsagEdge> edges;

  const PsagNode* find_node(int instance_id) const;
  const PsagEdge* find_edge(int a, int b) const;
  std::set<std::pair<int, int>> edge_set() const;
};

/// Maximal frame interval with a constant contact-edge set.
struct Subtask {
  int start_frame = 0;
  int end_frame = 0;   // inclusive
  int goal_frame = 0;  // first frame of the next subtask, or the final frame
};

struct PsagSequence {
  SceneManifest manifest;
  int receptacle_id = -1;  // -1 means poses stayed in the world frame
  int tool_id = -1;
  Pose receptacle_world;  // world pose of the receptacle frame (frame 0)
  std::vector<Psag> frames;
  std::vector<Subtask> subtasks;
  Warnings warnings;

  const Psag& goal_graph(const Subtask& s) const;
  /// Poses of one object over [start, end], occluded frames flagged.
  struct PoseSample {
    double time = 0.0;
    Pose pose;
    bool occluded = false;
  };
  std::vector<PoseSample> reference_trajectory(const Subtask& s, int instance_id) const;
};

// ---------------------------------------------------------------- operations

struct ObjectTrack {
  int instance_id = 0;
  std::vector<std::vector<Vec3>> clouds;  // one per frame; carried forward when absent
  std::vector<bool> occluded;
};

struct TrackSet {
  std::map<int, ObjectTrack> tracks;
  Warnings warnings;
};

struct TrackParams {
  double pose_jump_warn = 0.2;  // meters per frame; larger centroid jumps warn
};

/// Identity-by-label tracking. Objects listed in the manifest but absent in
/// every frame are dropped with a warning; frames where an object is absent
/// carry the last seen cloud forward with an occlusion flag.
TrackSet track_objects(const std::vector<SemanticFrame>& frames, const SceneManifest& manifest,
                       const TrackParams& params = {});

struct InteractionParams {
  int levels = 3;
  double contact_threshold = 0.01;  // meters between downsampled clouds
  double downsample_voxel = 0.005;
};

struct InteractionSet {
  std::set<int> objects;      // hop distance 1..levels from the hand, hand excluded
  std::map<int, int> level;   // hop distance per object
};

/// Objects within `levels` hops of the hand in the union-over-frames contact
/// graph. Requires a manifest with exactly one hand.
InteractionSet filter_interaction(const std::vector<SemanticFrame>& frames,
                                  const SceneManifest& manifest,
                                  const InteractionParams& params = {});

struct GraphParams {
  InteractionParams interaction;
  double contact_band = 0.005;
  double region_voxel = 0.005;
  double region_sigma = 0.01;
  IcpParams icp;
  int debounce = 3;
};

/// Full graph construction: frame-to-frame pose chain (OBB init, ICP
/// refinement), contact edges with smoothed regions, receptacle selection,
/// receptacle-frame re-expression, and subtask segmentation.
PsagSequence build_graph_sequence(const TrackSet& tracks, const InteractionSet& interaction,
                                  const SceneManifest& manifest, const GraphParams& params = {});

/// Boundary wherever the edge set departs from the current stable set and
/// the new set persists at least `debounce` frames.
std::vector<Subtask> segment_subtasks(const std::vector<Psag>& frames, int debounce);

void save_psag(const PsagSequence& seq, const std::filesystem::path& file);
PsagSequence load_psag(const std::filesystem::path& file);

}  // namespace psag
