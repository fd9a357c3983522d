#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "psag/graph.hpp"

namespace psag::sim {

enum class MaterialModel { Elastic, Elastoplastic, Fluid };

struct MaterialPreset {
  std::string name;
  double density = 1000.0;        // kg/m^3
  double youngs_modulus = 1e4;    // Pa
  double poisson_ratio = 0.3;
  double yield_stress = 0.0;      // Pa, elastoplastic only
  MaterialModel model = MaterialModel::Elastic;

  double mu() const { return youngs_modulus / (2.0 * (1.0 + poisson_ratio)); }
  double lambda() const {
    return youngs_modulus * poisson_ratio /
           ((1.0 + poisson_ratio) * (1.0 - 2.0 * poisson_ratio));
  }
};

using MaterialTable = std::map<std::string, MaterialPreset>;

/// Built-in presets: dough, avocado-flesh, water, pizza. All tunable through
/// configuration; none of the constants is observable from video.
MaterialTable builtin_materials();

/// Kinematic rigid collider: oriented box or capsule signed-distance proxy.
struct BoxShape {
  Vec3 half_extents = Vec3::Ones();
};
struct CapsuleShape {
  double half_length = 0.05;
  double radius = 0.01;
};
using SdfShape = std::variant<BoxShape, CapsuleShape>;

double shape_sdf(const SdfShape& shape, const Pose& pose, const Vec3& p);
Vec3 shape_normal(const SdfShape& shape, const Pose& pose, const Vec3& p);
double shape_bounding_radius(const SdfShape& shape);

struct Twist {
  Vec3 linear = Vec3::Zero();   // m/s
  Vec3 angular = Vec3::Zero();  // rad/s, about the actuator origin
};

struct RigidActuator {
  int instance_id = -1;
  SdfShape shape;
  Pose pose;
  Twist twist;
  double friction = 0.4;
  bool sticky = false;  // dough-roller style tangential coupling
};

/// Piecewise-constant action sequence: knot k is held for `control_steps`
/// simulation steps, one row of knots per actuator.
struct ActionSequence {
  int control_steps = 1;
  std::vector<std::vector<Twist>> knots;  // [actuator][knot]

  int horizon() const { return knots.empty() ? 0 : static_cast<int>(knots.front().size()); }
  int total_steps() const { return horizon() * control_steps; }
  const Twist& at(int actuator, int step) const {
    return knots[static_cast<std::size_t>(actuator)]
                [static_cast<std::size_t>(step / control_steps)];
  }
};

struct MpmGrid {
  Vec3 origin = Vec3::Zero();
  double spacing = 0.01;  // h, meters
  Eigen::Vector3i dims = Eigen::Vector3i(64, 64, 64);  // node counts per axis

  Vec3 node_pos(int i, int j, int k) const { return origin + spacing * Vec3(i, j, k); }
  std::int64_t node_count() const {
    return static_cast<std::int64_t>(dims.x()) * dims.y() * dims.z();
  }
};

/// Particle state (structure of arrays) plus grid, colliders and materials.
/// Scenes are value types: copying one gives an independent simulation, which
/// is how perturbation rollouts run concurrently.
struct MpmScene {
  MpmGrid grid;
  double dt = 5e-4;
  Vec3 gravity = Vec3(0.0, 0.0, -9.8);
  double grid_damping = 0.0;  // per-step velocity decay on grid nodes

  std::vector<Vec3> x;      // positions
  std::vector<Vec3> v;      // velocities
  std::vector<Mat3> F;      // deformation gradients
  std::vector<Mat3> R;      // polar rotations of F, kept in sync by step()
  std::vector<Mat3> C;      // affine velocity fields
  std::vector<double> Jp;   // volume ratio, fluid model
  std::vector<double> mass;
  std::vector<double> volume0;
  std::vector<std::uint8_t> material;  // index into `materials`
  std::vector<int> object_id;

  std::vector<MaterialPreset> materials;
  std::vector<RigidActuator> actuators;
  std::vector<RigidActuator> obstacles;  // static colliders, twist ignored
  std::vector<int> object_ids;           // deformable instance ids, observation order

  std::size_t particle_count() const { return x.size(); }
  double total_mass() const;
  void add_particle(const Vec3& pos, const Vec3& vel, double m, double vol, std::uint8_t mat,
                    int object);
  int actuator_index(int instance_id) const;
  /// Max particle z of one object, robust to stragglers (quantile of z).
  double object_height(int instance_id, double quantile = 0.99) const;
  std::vector<Vec3> object_particles(int instance_id) const;
};

struct StepObservation {
  double time = 0.0;
  std::vector<WrenchSample> actuator_wrench;        // one per scene actuator
  std::vector<Pose> actuator_pose;                  // pose after the step
  std::vector<Vec3> object_centroid;                // one per scene.object_ids
  std::vector<Mat3> object_covariance;
  std::vector<std::pair<int, int>> contacts;        // (actuator id, object id)
};

struct SceneParams {
  double grid_spacing = 0.01;
  int particles_per_cell = 8;      // 2x2x2 fill of each cell
  double jitter = 0.2;             // fraction of fill spacing, seeded
  std::uint64_t seed = 0;
  double grid_margin = 0.12;       // padding around scene content, meters
  double dt = 5e-4;
  double friction = 0.4;
  bool sticky_tools = false;
  double grid_damping = 0.0;
  std::int64_t max_particles = 10'000'000;
  MaterialTable materials = builtin_materials();
};

/// Digital-twin construction from one graph frame: deformable nodes are
/// filled with particles over their OBB volume, listed actuator ids become
/// kinematic SDF colliders, remaining rigid nodes become static obstacles.
MpmScene init_scene(const Psag& frame, const SceneManifest& manifest,
                    const std::vector<int>& actuator_ids, const SceneParams& params);

/// One MLS-MPM cycle (quadratic B-splines, APIC transfer, fixed corotated /
/// von Mises / weakly compressible stress, grid collisions, kinematic
/// actuator advance). `step_index` is only used in error messages.
StepObservation step(MpmScene& scene, const std::vector<Twist>& action, int step_index = 0);

struct RolloutResult {
  std::vector<StepObservation> observations;
  MpmScene final_scene;
};

/// Deterministic open-loop rollout of `horizon` control intervals.
/// `per_step` (optional) sees the scene after every step.
RolloutResult rollout(const MpmScene& scene, const ActionSequence& actions, int horizon,
                      const std::function<void(int, const MpmScene&)>& per_step = {});

/// Connected particle components of one object under neighbor radius 2h.
std::vector<std::vector<std::int64_t>> split_bodies(const MpmScene& scene, int object_id);

/// Binary little-endian PLY with per-vertex instance ids; actuator origins
/// are included as flagged vertices.
void write_ply(const MpmScene& scene, const std::filesystem::path& file);

}  // namespace psag::sim
