#include "psag/synthetic.hpp"

#include <cmath>
#include <random>

#include "psag/ingest.hpp"

namespace psag::synth {

void fill_box(sim::MpmScene& scene, const Vec3& center, const Vec3& half_extents,
              const sim::MaterialPreset& preset, int object_id, double fill_spacing, double jitter,
              std::uint64_t seed) {
  std::uint8_t mat = 0;
  bool found = false;
  for (std::size_t i = 0; i < scene.materials.size(); ++i) {
    if (scene.materials[i].name == preset.name) {
      mat = static_cast<std::uint8_t>(i);
      found = true;
      break;
    }
  }
  if (!found) {
    mat = static_cast<std::uint8_t>(scene.materials.size());
    scene.materials.push_back(preset);
  }

  std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * (object_id + 1)));
  std::uniform_real_distribution<double> jit(-0.5, 0.5);
  Eigen::Vector3i n;
  Vec3 spacing;
  for (int k = 0; k < 3; ++k) {
    n[k] = static_cast<int>(std::max<std::int64_t>(1, std::llround(2.0 * half_extents[k] / fill_spacing)));
    spacing[k] = 2.0 * half_extents[k] / n[k];
  }
  const double vol = spacing.prod();
  const double m = preset.density * vol;
  for (int i = 0; i < n.x(); ++i) {
    for (int j = 0; j < n.y(); ++j) {
      for (int k = 0; k < n.z(); ++k) {
        Vec3 p = center - half_extents +
                 Vec3((i + 0.5) * spacing.x(), (j + 0.5) * spacing.y(), (k + 0.5) * spacing.z());
        p += jitter * Vec3(jit(rng) * spacing.x(), jit(rng) * spacing.y(), jit(rng) * spacing.z());
        scene.add_particle(p, Vec3::Zero(), m, vol, mat, object_id);
      }
    }
  }
}

sim::MpmScene make_block_scene(const BlockSceneParams& params) {
  sim::MpmScene scene;
  scene.dt = params.dt;
  scene.gravity = params.gravity;
  scene.grid_damping = params.grid_damping;
  scene.grid.spacing = params.grid_spacing;

  const Vec3 board_top(0.0, 0.0, params.dough_center.z() - params.dough_half.z());
  const double headroom = 4.0 * params.dough_half.z() + 0.1;
  const Vec3 lo = params.dough_center -
                  Vec3(params.board_half.x(), params.board_half.y(), params.dough_half.z() + 0.06);
  const Vec3 hi = params.dough_center +
                  Vec3(params.board_half.x(), params.board_half.y(), headroom);
  scene.grid.origin = lo;
  for (int k = 0; k < 3; ++k) {
    scene.grid.dims[k] = static_cast<int>(std::ceil((hi[k] - lo[k]) / params.grid_spacing)) + 1;
  }

  const auto materials = sim::builtin_materials();
  const auto it = materials.find(params.material);
  if (it == materials.end()) throw ArgumentError("unknown material " + params.material);
  const double fill = params.fill_spacing > 0.0 ? params.fill_spacing : params.grid_spacing / 2.0;
  fill_box(scene, params.dough_center, params.dough_half, it->second, 2, fill, params.jitter,
           params.seed);

  if (params.board) {
    sim::RigidActuator board;
    board.instance_id = 3;
    board.shape = sim::BoxShape{params.board_half};
    board.pose.translation =
        Vec3(params.dough_center.x(), params.dough_center.y(), board_top.z() - params.board_half.z());
    board.friction = params.friction;
    scene.obstacles.push_back(board);
  }
  if (params.presser) {
    sim::RigidActuator presser;
    presser.instance_id = 1;
    presser.shape = sim::BoxShape{params.presser_half};
    presser.pose.translation =
        params.dough_center + Vec3(0.0, 0.0, params.dough_half.z() + params.presser_gap +
                                             params.presser_half.z());
    presser.friction = params.friction;
    presser.sticky = params.sticky;
    scene.actuators.push_back(presser);
  }
  return scene;
}

// --------------------------------------------------------------- press demo

namespace {

void append_cloud(SemanticFrame& frame, const std::vector<Vec3>& points, int instance_id,
                  std::size_t max_points) {
  const std::size_t stride = std::max<std::size_t>(1, points.size() / max_points);
  for (std::size_t i = 0; i < points.size(); i += stride) {
    frame.points.push_back({points[i], instance_id, 1.0});
  }
}

SceneManifest press_manifest(const PressDemoParams& params, bool with_hand) {
  SceneManifest m;
  if (with_hand) m.objects.push_back({0, "hand", "hand", true, false, ""});
  m.objects.push_back({1, "presser", "presser", false, false, ""});
  m.objects.push_back({2, "dough", "dough", false, true, "dough"});
  m.objects.push_back({3, "board", "board", false, false, ""});
  m.frame_rate = params.frame_rate;
  m.gravity = Vec3(0.0, 0.0, -9.8);
  m.workspace_bounds.min = Vec3(-0.5, -0.5, -0.2);
  m.workspace_bounds.max = Vec3(0.5, 0.5, 0.5);
  m.receptacle_id = 3;  // the board: stationary task surface
  return m;
}

}  // namespace

PressDemoIds generate_press_demo(const std::filesystem::path& dir, const PressDemoParams& params) {
  PressDemoIds ids;

  BlockSceneParams block;
  block.dough_half = params.dough_half;
  block.dough_center = Vec3(0.0, 0.0, params.dough_half.z());
  block.board_half = params.board_half;
  block.presser_half = params.presser_half;
  block.presser_gap = params.start_clearance;
  block.grid_spacing = params.grid_spacing;
  block.dt = params.sim_dt;
  block.grid_damping = 0.005;
  block.seed = params.seed;
  sim::MpmScene scene = make_block_scene(block);

  const double dough_height = 2.0 * params.dough_half.z();
  const double press_depth = params.press_fraction * dough_height;
  const double total_time = params.approach_time + params.press_time + params.hold_time;
  const auto total_steps = static_cast<int>(std::llround(total_time / params.sim_dt));
  const auto export_stride =
      std::max(1, static_cast<int>(std::llround(1.0 / (params.frame_rate * params.sim_dt))));

  const Vec3 hand_half(0.02, 0.02, 0.015);
  std::vector<SemanticFrame> frames;

  auto export_frame = [&](int frame_index) {
    SemanticFrame f;
    f.frame_index = frame_index;
    f.timestamp = frame_index / params.frame_rate;
    append_cloud(f, scene.object_particles(ids.dough), ids.dough, params.max_points_per_object);
    const auto& presser = scene.actuators.front();
    const auto* presser_box = std::get_if<sim::BoxShape>(&presser.shape);
    append_cloud(f,
                 OrientedBox{presser.pose, presser_box->half_extents}.surface_samples(0.008),
                 ids.presser, params.max_points_per_object);
    Pose hand_pose = presser.pose;
    hand_pose.translation.z() += presser_box->half_extents.z() + hand_half.z();
    append_cloud(f, OrientedBox{hand_pose, hand_half}.surface_samples(0.01), ids.hand,
                 params.max_points_per_object);
    const auto& board = scene.obstacles.front();
    const auto* board_box = std::get_if<sim::BoxShape>(&board.shape);
    append_cloud(f, OrientedBox{board.pose, board_box->half_extents}.surface_samples(0.015),
                 ids.board, params.max_points_per_object);
    frames.push_back(std::move(f));
  };

  export_frame(0);
  int exported = 1;
  for (int s = 0; s < total_steps; ++s) {
    const double t = s * params.sim_dt;
    sim::Twist twist;
    if (t < params.approach_time) {
      twist.linear = Vec3(0.0, 0.0, -params.start_clearance / params.approach_time);
    } else if (t < params.approach_time + params.press_time) {
      const double tp = t - params.approach_time;
      twist.linear = Vec3(params.wiggle_speed * std::sin(2.0 * M_PI * params.wiggle_hz * tp), 0.0,
                          -press_depth / params.press_time);
    }
    sim::step(scene, {twist}, s);
    if ((s + 1) % export_stride == 0) {
      export_frame(exported);
      ++exported;
    }
  }

  save_sequence(press_manifest(params, true), frames, dir);
  return ids;
}

void generate_press_test_scene(const std::filesystem::path& dir, const PressTestParams& params) {
  const auto& demo = params.demo;
  SemanticFrame frame;
  frame.frame_index = 0;
  frame.timestamp = 0.0;

  // Dough scaled about its own base, resting on the board.
  const Vec3 dough_half = params.scale * demo.dough_half;
  const Vec3 dough_center = Vec3(params.offset.x(), params.offset.y(), dough_half.z());
  {
    sim::MpmScene sampler;
    sampler.grid.origin = dough_center - 2.0 * dough_half;
    sampler.grid.dims = Eigen::Vector3i(8, 8, 8);
    fill_box(sampler, dough_center, dough_half, sim::builtin_materials().at("dough"), 0, 0.0075,
             0.2, demo.seed + 17);
    append_cloud(frame, sampler.x, 2, demo.max_points_per_object);
  }
  {
    Pose presser_pose;
    presser_pose.translation = Vec3(
        0.0, 0.0, 2.0 * demo.dough_half.z() + demo.start_clearance + demo.presser_half.z());
    append_cloud(frame, OrientedBox{presser_pose, demo.presser_half}.surface_samples(0.008), 1,
                 demo.max_points_per_object);
  }
  {
    Pose board_pose;
    board_pose.translation = Vec3(0.0, 0.0, -demo.board_half.z());
    append_cloud(frame, OrientedBox{board_pose, demo.board_half}.surface_samples(0.015), 3,
                 demo.max_points_per_object);
  }
  save_sequence(press_manifest(demo, false), {frame}, dir);
}

}  // namespace psag::synth
