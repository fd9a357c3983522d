#include <algorithm>
#include <cmath>

#include "psag/optimizer.hpp"

namespace psag::opt {

void CostWeights::validate() const {
  if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0 || separation_weight < 0.0) {
    throw ArgumentError("cost weights must be non-negative");
  }
  if (lambda1 == 0.0 && lambda2 == 0.0 && lambda3 == 0.0 && separation_weight == 0.0) {
    throw ArgumentError("at least one cost weight must be positive");
  }
  if (!(kl_epsilon > 0.0)) throw ArgumentError("kl_epsilon must be positive");
}

double contact_cost(const std::optional<ContactRegion>& current,
                    const std::optional<ContactRegion>& target, double kl_epsilon) {
  if (!target) {
    // No geometric constraint: cost is zero without contact, otherwise the
    // stray contact mass.
    return current ? current->sum() : 0.0;
  }
  const double s = target->sum();
  if (std::abs(s - 1.0) > 1e-6) throw ArgumentError("target contact region is not normalized");

  // Resample the current region onto the target grid; absent contact leaves
  // an all-floor distribution.
  std::vector<double> q(static_cast<std::size_t>(target->dims.prod()), 0.0);
  if (current) {
    if (std::abs(current->sum() - 1.0) > 1e-6) {
      throw ArgumentError("current contact region is not normalized");
    }
    q = resample_onto(*current, *target);
  }

  double p_total = 0.0, q_total = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    q[i] = std::max(q[i], kl_epsilon);
    q_total += q[i];
  }
  std::vector<double> p(target->weights);
  for (auto& w : p) {
    w = std::max(w, kl_epsilon);
    p_total += w;
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = p[i] / p_total;
    const double qi = q[i] / q_total;
    kl += pi * std::log(pi / qi);
  }
  return std::max(kl, 0.0);
}

double pose_cost(const std::vector<Pose>& state, const std::vector<Pose>& reference, double w_rot) {
  if (state.size() != reference.size()) {
    throw ArgumentError("pose_cost needs matching object sets");
  }
  double cost = 0.0;
  for (std::size_t i = 0; i < state.size(); ++i) {
    const double angle = rotation_angle(state[i].rotation, reference[i].rotation);
    cost += (state[i].translation - reference[i].translation).squaredNorm() + w_rot * angle * angle;
  }
  return cost;
}

double energy_cost(const Twist& action, double w_ang) {
  return action.linear.squaredNorm() + w_ang * action.angular.squaredNorm();
}

double separation_cost(const MpmScene& scene, int object_id, int target_parts, double p_unsplit,
                       double d_cap) {
  const auto comps = sim::split_bodies(scene, object_id);
  if (static_cast<int>(comps.size()) < target_parts) return p_unsplit;

  double cost = 0.0;
  for (std::size_t a = 0; a < comps.size(); ++a) {
    for (std::size_t b = a + 1; b < comps.size(); ++b) {
      std::vector<Vec3> pa, pb;
      pa.reserve(comps[a].size());
      pb.reserve(comps[b].size());
      for (auto idx : comps[a]) pa.push_back(scene.x[static_cast<std::size_t>(idx)]);
      for (auto idx : comps[b]) pb.push_back(scene.x[static_cast<std::size_t>(idx)]);
      const auto ch = chamfer_closest(pa, pb, 0.0);
      cost -= std::clamp(ch.min_distance, 0.0, d_cap);
    }
  }
  return cost;
}

// ------------------------------------------------------- rollout-level scoring

namespace {

// Per-problem cache of collider surface lattices (local frame) so repeated
// contact queries only pay for a pose transform.
struct BodyGeometry {
  bool is_collider = false;
  int collider_actuator = -1;  // index into scene.actuators, -1 for obstacles
  int collider_obstacle = -1;
  std::vector<Vec3> local_samples;
};

struct ContactCache {
  std::map<int, BodyGeometry> bodies;

  const BodyGeometry* find(const MpmScene& scene, int id, double spacing) {
    auto it = bodies.find(id);
    if (it != bodies.end()) return &it->second;
    BodyGeometry geom;
    for (std::size_t a = 0; a < scene.actuators.size(); ++a) {
      if (scene.actuators[a].instance_id == id) {
        if (const auto* box = std::get_if<sim::BoxShape>(&scene.actuators[a].shape)) {
          geom.is_collider = true;
          geom.collider_actuator = static_cast<int>(a);
          geom.local_samples = OrientedBox{Pose{}, box->half_extents}.surface_samples(spacing);
        }
      }
    }
    for (std::size_t o = 0; o < scene.obstacles.size(); ++o) {
      if (scene.obstacles[o].instance_id == id) {
        if (const auto* box = std::get_if<sim::BoxShape>(&scene.obstacles[o].shape)) {
          geom.is_collider = true;
          geom.collider_obstacle = static_cast<int>(o);
          geom.local_samples = OrientedBox{Pose{}, box->half_extents}.surface_samples(spacing);
        }
      }
    }
    return &bodies.emplace(id, std::move(geom)).first->second;
  }
};

std::vector<Vec3> body_world_points(const MpmScene& scene, int id, const SubtaskProblem& problem,
                                    ContactCache& cache) {
  const BodyGeometry* geom = cache.find(scene, id, problem.region_voxel);
  if (geom->is_collider) {
    const Pose& pose = geom->collider_actuator >= 0
                           ? scene.actuators[static_cast<std::size_t>(geom->collider_actuator)].pose
                           : scene.obstacles[static_cast<std::size_t>(geom->collider_obstacle)].pose;
    std::vector<Vec3> out;
    out.reserve(geom->local_samples.size());
    for (const auto& p : geom->local_samples) out.push_back(pose.apply(p));
    return out;
  }
  return downsample(scene.object_particles(id), problem.region_voxel);
}

// Keep only points within `margin` of the other cloud's bounding box. The
// global minimum pair survives whenever it is closer than `margin`, which is
// all the contact test needs.
void aabb_prefilter(std::vector<Vec3>& a, std::vector<Vec3>& b, double margin) {
  auto bounds = [](const std::vector<Vec3>& pts) {
    Vec3 lo = pts.front(), hi = pts.front();
    for (const auto& p : pts) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    return std::make_pair(lo, hi);
  };
  const auto [alo, ahi] = bounds(a);
  const auto [blo, bhi] = bounds(b);
  auto filter = [margin](std::vector<Vec3>& pts, const Vec3& lo, const Vec3& hi) {
    std::vector<Vec3> kept;
    kept.reserve(pts.size());
    for (const auto& p : pts) {
      if ((p.array() >= lo.array() - margin).all() && (p.array() <= hi.array() + margin).all()) {
        kept.push_back(p);
      }
    }
    pts.swap(kept);
  };
  filter(a, blo, bhi);
  filter(b, alo, ahi);
}

std::optional<ContactRegion> contact_region_cached(const MpmScene& scene, int id_a, int id_b,
                                                   const SubtaskProblem& problem,
                                                   ContactCache& cache) {
  std::vector<Vec3> a = body_world_points(scene, id_a, problem, cache);
  std::vector<Vec3> b = body_world_points(scene, id_b, problem, cache);
  if (a.empty() || b.empty()) return std::nullopt;
  aabb_prefilter(a, b, problem.contact_threshold + problem.contact_band);
  if (a.empty() || b.empty()) return std::nullopt;
  if (a.size() > b.size()) a.swap(b);  // iterate the smaller cloud
  const auto ch = chamfer_closest(a, b, problem.contact_band);
  if (ch.min_distance >= problem.contact_threshold) return std::nullopt;

  // Deep contact can yield an enormous pair set; a deterministic stride
  // subsample keeps the distribution while bounding the smoothing cost.
  constexpr std::size_t kMaxPairs = 3000;
  std::vector<Vec3> midpoints;
  const std::size_t stride = std::max<std::size_t>(1, ch.closest_pairs.size() / kMaxPairs);
  midpoints.reserve(std::min(kMaxPairs + 1, ch.closest_pairs.size()));
  for (std::size_t i = 0; i < ch.closest_pairs.size(); i += stride) {
    const auto& pr = ch.closest_pairs[i];
    midpoints.push_back(0.5 * (a[static_cast<std::size_t>(pr.index_a)] +
                               b[static_cast<std::size_t>(pr.index_b)]));
  }
  ContactRegion region =
      smooth_contact_midpoints(midpoints, problem.region_voxel, problem.region_sigma);
  region.anchor_pair = {std::min(id_a, id_b), std::max(id_a, id_b)};
  return region;
}

bool contact_exists_cached(const MpmScene& scene, int id_a, int id_b,
                           const SubtaskProblem& problem, ContactCache& cache) {
  std::vector<Vec3> a = body_world_points(scene, id_a, problem, cache);
  std::vector<Vec3> b = body_world_points(scene, id_b, problem, cache);
  if (a.empty() || b.empty()) return false;
  aabb_prefilter(a, b, problem.contact_threshold);
  if (a.empty() || b.empty()) return false;
  if (a.size() > b.size()) a.swap(b);
  return chamfer_closest(a, b, 0.0).min_distance < problem.contact_threshold;
}

}  // namespace

std::optional<ContactRegion> scene_contact_region(const MpmScene& scene, int id_a, int id_b,
                                                  const SubtaskProblem& problem) {
  ContactCache cache;
  return contact_region_cached(scene, id_a, id_b, problem, cache);
}

LossBreakdown evaluate_actions(const SubtaskProblem& problem, const ActionSequence& actions) {
  problem.weights.validate();
  const int horizon = actions.horizon();
  const int total_steps = horizon * actions.control_steps;

  const int window =
      problem.weights.full_horizon_contact
          ? total_steps
          : std::max(1, static_cast<int>(std::ceil(problem.weights.terminal_window * total_steps)));
  const int window_start = total_steps - window;

  LossBreakdown terms;
  ContactCache cache;

  auto contact_at = [&](const MpmScene& scene) {
    double c = 0.0;
    for (const auto& goal : problem.contact_goals) {
      const auto current = contact_region_cached(scene, goal.a, goal.b, problem, cache);
      c += contact_cost(current, goal.target, problem.weights.kl_epsilon);
    }
    for (const auto& [a, b] : problem.forbidden_pairs) {
      // Only existence matters against a no-contact goal; a normalized
      // region always carries mass 1.
      if (contact_exists_cached(scene, a, b, problem, cache)) c += 1.0;
    }
    return c;
  };

  auto per_step = [&](int step, const MpmScene& scene) {
    if (step >= window_start && (step - window_start) % problem.contact_stride == 0) {
      terms.contact += contact_at(scene) * problem.contact_stride;
    }
  };

  const auto result = total_steps > 0
                          ? sim::rollout(problem.scene, actions, horizon, per_step)
                          : sim::RolloutResult{{}, problem.scene};

  // Pose tracking and action energy over every step.
  for (std::size_t s = 0; s < result.observations.size(); ++s) {
    const auto& obs = result.observations[s];
    std::vector<Pose> state, ref;
    for (std::size_t a = 0; a < obs.actuator_pose.size(); ++a) {
      if (s < problem.reference[a].size()) {
        state.push_back(obs.actuator_pose[a]);
        ref.push_back(problem.reference[a][s]);
      }
    }
    terms.pose += pose_cost(state, ref, problem.weights.w_rot);
    for (std::size_t a = 0; a < problem.scene.actuators.size(); ++a) {
      terms.energy += energy_cost(actions.at(static_cast<int>(a), static_cast<int>(s)),
                                  problem.weights.w_ang);
    }
  }

  for (const auto& [object, parts] : problem.separation_targets) {
    if (parts > 1) {
      terms.separation += separation_cost(result.final_scene, object, parts,
                                          problem.weights.p_unsplit, problem.weights.d_cap);
    }
  }
  return terms;
}

}  // namespace psag::opt
