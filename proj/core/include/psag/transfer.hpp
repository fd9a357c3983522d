#pragma once

#include <map>

#include "psag/optimizer.hpp"

namespace psag::xfer {

/// A hand-free scene capture: manifest, one merged cloud, and the mapping
/// from demonstration instance ids to test instance ids.
struct TestScene {
  SceneManifest manifest;
  SemanticFrame frame;
  std::map<int, int> correspondence;  // demo id -> test id
  Warnings warnings;
};

/// Reads manifest.json + a single frame from `dir`. The correspondence comes
/// from correspondence.json ({"demo_id": test_id}) when present, otherwise
/// objects are matched by unique category against `demo`.
TestScene load_test_scene(const std::filesystem::path& dir, const PsagSequence* demo = nullptr);

struct GroundedObject {
  Pose pose;  // world frame (OBB pose)
  OrientedBox obb;
  NunocsMap nunocs;  // world frame
  std::vector<Vec3> cloud;
};

/// OBB fit -> NUNOCS map -> pose per test object, world frame, real scale.
std::map<int, GroundedObject> ground_scene(const TestScene& test);

/// Maps the demonstration sequence onto the test instances: object poses go
/// demo-NUNOCS -> canonical -> test-NUNOCS-inverse, contact regions are
/// re-anchored (position through the support object, shape through the
/// moving object), and the result is expressed in the test receptacle frame
/// with `receptacle_world` set from the grounding.
PsagSequence retarget_psag(const PsagSequence& demo, const std::map<int, GroundedObject>& grounding,
                           const std::map<int, int>& correspondence);

struct FeasibilityParams {
  double penetration_tol = 0.005;  // meters of allowed initial overlap
};

/// Throws ValidationError when the tool starts deeply inside another object.
void check_feasibility(const PsagSequence& seq, const FeasibilityParams& params = {});

/// Test-time re-optimization: feasibility check, then the same subtask-chain
/// optimization as the demonstration stage, on the retargeted sequence at
/// real scale.
opt::SequenceRunResult reoptimize(const PsagSequence& retargeted, const opt::SequenceConfig& config,
                                  const FeasibilityParams& feasibility = {});

/// Hybrid motion-force target: componentwise k1 * p_sim + k2 * (f_real -
/// f_sim) over the force components. Pure, total.
Vec3 hybrid_target(const Vec3& p_sim, const WrenchSample& f_sim, const WrenchSample& f_real,
                   double k1, double k2);

struct ControllerTarget {
  double time = 0.0;
  Vec3 position = Vec3::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
  WrenchSample reference_wrench;
  double k1 = 1.0;
  double k2 = 0.002;
};

struct ControllerProgram {
  int tool_id = -1;
  std::string frame = "world";
  double rate_hz = 10.0;
  std::string task_name;
  std::vector<std::pair<int, int>> subtask_boundaries;  // (start, end) target indices
  std::vector<ControllerTarget> targets;

  void validate() const;  // non-empty, t=0 start, strictly increasing, k1 > 0
};

struct Gains {
  double k1 = 1.0;
  double k2 = 0.002;  // m/N
};

/// One world-frame trajectory sample feeding program emission.
struct TrajectorySample {
  double time = 0.0;
  Pose pose;
  WrenchSample wrench;
};

/// Resamples a rollout trajectory at `rate` (linear positions/forces, slerp
/// orientations) and attaches gains. Emits a warning string when `rate`
/// exceeds the simulation resolution.
ControllerProgram emit_program(const std::vector<TrajectorySample>& trajectory, int tool_id,
                               const Gains& gains, double rate_hz, Warnings* warnings = nullptr);

/// World-frame tool trajectory of a sequence run (receptacle-frame rollouts
/// composed with `receptacle_world`), starting with the initial pose at t=0.
std::vector<TrajectorySample> world_trajectory(const opt::SequenceRunResult& run,
                                               const PsagSequence& seq);

void save_program(const ControllerProgram& program, const std::filesystem::path& file);
ControllerProgram load_program(const std::filesystem::path& file);

}  // namespace psag::xfer
