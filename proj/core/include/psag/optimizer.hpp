#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "psag/mpm.hpp"

namespace psag::opt {

using sim::ActionSequence;
using sim::MpmScene;
using sim::StepObservation;
using sim::Twist;

struct CostWeights {
  double lambda1 = 1.0;   // contact term
  double lambda2 = 0.1;   // pose-tracking term
  double lambda3 = 0.01;  // action-energy term
  double separation_weight = 1.0;
  double kl_epsilon = 1e-9;
  double p_unsplit = 1.0;        // penalty while the object is still whole
  double d_cap = 0.05;           // separation distance cap, meters
  double w_rot = 0.01;           // m^2/rad^2, rotation weight in pose_cost
  double w_ang = 0.01;           // m^2/rad^2, angular weight in energy_cost
  double terminal_window = 0.1;  // trailing fraction of steps carrying the contact term
  bool full_horizon_contact = false;

  void validate() const;
};

/// KL(target || current) over the target's grid when the goal demands
/// contact; zero when neither side has contact; the stray contact mass when
/// contact exists against a no-contact goal.
double contact_cost(const std::optional<ContactRegion>& current,
                    const std::optional<ContactRegion>& target, double kl_epsilon);

/// Squared translation error plus w_rot * squared geodesic angle, summed
/// over paired poses.
double pose_cost(const std::vector<Pose>& state, const std::vector<Pose>& reference, double w_rot);

double energy_cost(const Twist& action, double w_ang);

/// P_unsplit while components < target_parts; otherwise the negated sum of
/// capped pairwise inter-component distances.
double separation_cost(const MpmScene& scene, int object_id, int target_parts, double p_unsplit,
                       double d_cap);

struct LossBreakdown {
  double contact = 0.0;
  double pose = 0.0;
  double energy = 0.0;
  double separation = 0.0;

  double total(const CostWeights& w) const {
    return w.lambda1 * contact + w.lambda2 * pose + w.lambda3 * energy +
           w.separation_weight * separation;
  }
};

/// Everything needed to score an action sequence for one subtask.
struct SubtaskProblem {
  MpmScene scene;  // state at the subtask start
  std::vector<int> actuator_instance_ids;

  /// Goal contact targets: pairs that must be in contact and their target
  /// distributions; any other observed contact is penalized only when it
  /// involves a pair listed in `forbidden_pairs`.
  struct ContactGoal {
    int a = 0;
    int b = 0;
    ContactRegion target;
  };
  std::vector<ContactGoal> contact_goals;
  std::vector<std::pair<int, int>> forbidden_pairs;  // goal says: no contact here

  /// Reference pose per actuator per sim step, already resampled.
  std::vector<std::vector<Pose>> reference;  // [actuator][step]

  std::vector<std::pair<int, int>> separation_targets;  // (object id, target parts)

  CostWeights weights;
  double contact_threshold = 0.01;
  double contact_band = 0.005;
  double region_voxel = 0.005;
  double region_sigma = 0.01;
  int contact_stride = 1;  // evaluate the contact term every n-th window step
};

/// Current contact region between two scene bodies (particles or collider
/// surface samples), or nullopt when they are farther than the threshold.
std::optional<ContactRegion> scene_contact_region(const MpmScene& scene, int id_a, int id_b,
                                                  const SubtaskProblem& problem);

/// Rolls the actions out and scores Eq-style terms: contact over the
/// terminal window, pose and energy over every step, separation on the
/// final state.
LossBreakdown evaluate_actions(const SubtaskProblem& problem, const ActionSequence& actions);

enum class GradientScheme { CentralFd, ForwardFd };

/// Flat parameter vector layout shared by the optimizer: one entry per
/// (actuator, knot, unmasked twist component).
struct ParamLayout {
  int actuators = 0;
  int knots = 0;
  std::array<bool, 6> mask{true, true, true, true, true, true};

  int dims_per_knot() const;
  int size() const;
  std::vector<double> pack(const ActionSequence& actions) const;
  void unpack(const std::vector<double>& params, ActionSequence& actions) const;
};

/// Finite-difference gradient of an arbitrary loss functional. Perturbed
/// evaluations run concurrently (the functional must be safe to call from
/// multiple threads); results are deterministic for fixed inputs.
std::vector<double> estimate_gradient(const std::function<double(const ActionSequence&)>& loss,
                                      const ActionSequence& actions, const ParamLayout& layout,
                                      GradientScheme scheme, double delta);

struct AdamConfig {
  double lr = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int max_iters = 100;
  double fd_delta = 1e-3;
  GradientScheme scheme = GradientScheme::CentralFd;
  double v_max = 0.5;      // m/s, per component
  double omega_max = 2.0;  // rad/s, per component
  std::array<bool, 6> twist_mask{true, true, true, true, true, true};
  int control_steps = 25;  // sim steps per knot
  int max_knots = 20;
  double converged_grad_norm = 1e-10;
};

struct OptimizationReport {
  std::vector<double> loss_curve;             // loss per iteration, [0] = init
  std::vector<LossBreakdown> term_curve;
  std::vector<double> grad_norm_curve;
  LossBreakdown final_terms;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double wall_time_sec = 0.0;
  bool converged = false;
  std::string failure_note;
};

struct OptimizeResult {
  ActionSequence actions;  // best-loss iterate
  OptimizationReport report;
};

/// Adam over the masked twist parameters, initialized from `init`, clamped
/// to bounds after every update. Never returns a loss above the
/// initialization loss; a simulation failure ends the run with the best
/// feasible iterate and a failure note.
OptimizeResult optimize_subtask(const SubtaskProblem& problem, const ActionSequence& init,
                                const AdamConfig& config);

/// Piecewise-constant twists reproducing the reference poses at knot
/// boundaries (pose finite differences). Occluded samples are skipped.
ActionSequence actions_from_reference(
    const std::vector<std::vector<PsagSequence::PoseSample>>& reference_per_actuator, double dt,
    int control_steps, int max_knots);

/// Attaches per-frame wrench samples from subtask rollouts to contact edges
/// that involve an actuator (nearest rollout step in time).
struct SubtaskRollout {
  int subtask_index = 0;
  double start_time = 0.0;  // demo time of the subtask start
  double dt = 0.0;
  std::vector<StepObservation> observations;
};
void annotate_forces(PsagSequence& seq, const std::vector<SubtaskRollout>& rollouts);

// --------------------------------------------------- sequence-level pipeline

struct SequenceConfig {
  AdamConfig adam;
  CostWeights weights;
  sim::SceneParams scene;
  double contact_threshold = 0.01;
  double contact_band = 0.005;
  double region_voxel = 0.005;
  double region_sigma = 0.01;
  int contact_stride = 1;
};

/// One subtask's outcome inside a sequence run.
struct SubtaskOutcome {
  int subtask_index = 0;
  ActionSequence actions;
  OptimizationReport report;
};

struct SequenceRunResult {
  std::vector<SubtaskOutcome> subtasks;
  std::vector<SubtaskRollout> rollouts;  // from the best actions, chained
  MpmScene final_scene;
  double initial_loss = 0.0;  // summed over subtasks
  double final_loss = 0.0;
  double sim_dt = 0.0;
};

/// Chains the subtasks of a graph sequence through the simulator: builds the
/// digital twin from frame `start`, then per subtask initializes actions from
/// the reference trajectory, optimizes them, and carries the final state into
/// the next subtask. The scene lives in the sequence's receptacle frame;
/// gravity is rotated into it via `seq.receptacle_world`.
SequenceRunResult optimize_sequence(const PsagSequence& seq, const SequenceConfig& config);

}  // namespace psag::opt
