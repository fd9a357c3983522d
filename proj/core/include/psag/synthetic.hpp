#pragma once

#include "psag/mpm.hpp"

namespace psag::synth {

/// Seeds a lattice of particles over an axis-aligned box region.
void fill_box(sim::MpmScene& scene, const Vec3& center, const Vec3& half_extents,
              const sim::MaterialPreset& preset, int object_id, double fill_spacing,
              double jitter = 0.2, std::uint64_t seed = 0);

/// Dough block on an optional static board with an optional box presser
/// actuator above it. The workhorse scene for simulator and optimizer tests.
struct BlockSceneParams {
  Vec3 dough_half = Vec3(0.05, 0.05, 0.03);
  Vec3 dough_center = Vec3(0.0, 0.0, 0.03);
  std::string material = "dough";
  double grid_spacing = 0.01;
  double dt = 1e-3;
  Vec3 gravity = Vec3(0.0, 0.0, -9.8);
  double grid_damping = 0.0;
  bool board = true;
  Vec3 board_half = Vec3(0.2, 0.2, 0.015);
  bool presser = true;
  Vec3 presser_half = Vec3(0.1, 0.1, 0.01);
  double presser_gap = 0.01;  // clearance above the dough at start
  double friction = 0.4;
  bool sticky = false;
  double jitter = 0.2;
  std::uint64_t seed = 0;
  double fill_spacing = 0.0;  // 0 = grid_spacing / 2
};
sim::MpmScene make_block_scene(const BlockSceneParams& params);

/// Scripted flatten-the-dough demonstration, exported as a semantic
/// point-cloud sequence (manifest + frames). Object ids are fixed:
/// hand 0, presser 1, dough 2, board 3; the board is the receptacle.
struct PressDemoParams {
  Vec3 dough_half = Vec3(0.05, 0.05, 0.03);
  Vec3 board_half = Vec3(0.2, 0.2, 0.015);
  Vec3 presser_half = Vec3(0.1, 0.1, 0.01);
  double start_clearance = 0.04;  // presser bottom above the dough top
  double press_fraction = 0.35;   // of the dough height
  double approach_time = 0.3;
  double press_time = 0.4;
  double hold_time = 0.2;
  double wiggle_speed = 0.15;     // m/s lateral wiggle during the press
  double wiggle_hz = 2.5;
  double frame_rate = 30.0;
  double sim_dt = 5e-4;
  double grid_spacing = 0.01;
  std::uint64_t seed = 0;
  std::size_t max_points_per_object = 3500;
};

struct PressDemoIds {
  int hand = 0;
  int presser = 1;
  int dough = 2;
  int board = 3;
};

PressDemoIds generate_press_demo(const std::filesystem::path& dir, const PressDemoParams& params);

/// Matching hand-free test scene: the dough block scaled by `scale` and
/// shifted by `offset`, same presser and board.
struct PressTestParams {
  PressDemoParams demo;
  double scale = 1.5;
  Vec3 offset = Vec3(0.02, 0.01, 0.0);
};
void generate_press_test_scene(const std::filesystem::path& dir, const PressTestParams& params);

}  // namespace psag::synth
