#include "psag/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace psag::opt {

// ---------------------------------------------------------------- ParamLayout

int ParamLayout::dims_per_knot() const {
  int n = 0;
  for (bool b : mask) n += b ? 1 : 0;
  return n;
}

int ParamLayout::size() const { return actuators * knots * dims_per_knot(); }

std::vector<double> ParamLayout::pack(const ActionSequence& actions) const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(size()));
  for (int a = 0; a < actuators; ++a) {
    for (int k = 0; k < knots; ++k) {
      const Twist& t = actions.knots[a][k];
      for (int d = 0; d < 6; ++d) {
        if (!mask[d]) continue;
        out.push_back(d < 3 ? t.linear[d] : t.angular[d - 3]);
      }
    }
  }
  return out;
}

void ParamLayout::unpack(const std::vector<double>& params, ActionSequence& actions) const {
  std::size_t i = 0;
  for (int a = 0; a < actuators; ++a) {
    for (int k = 0; k < knots; ++k) {
      Twist& t = actions.knots[a][k];
      for (int d = 0; d < 6; ++d) {
        if (!mask[d]) continue;
        (d < 3 ? t.linear[d] : t.angular[d - 3]) = params[i++];
      }
    }
  }
}

// ----------------------------------------------------------- estimate_gradient

std::vector<double> estimate_gradient(const std::function<double(const ActionSequence&)>& loss,
                                      const ActionSequence& actions, const ParamLayout& layout,
                                      GradientScheme scheme, double delta) {
  if (!(delta > 0.0)) throw ArgumentError("fd delta must be positive");
  const int n = layout.size();
  std::vector<double> grad(static_cast<std::size_t>(n), 0.0);
  if (n == 0) return grad;

  const std::vector<double> base = layout.pack(actions);
  double base_loss = 0.0;
  if (scheme == GradientScheme::ForwardFd) {
    base_loss = loss(actions);
    if (!std::isfinite(base_loss)) throw NumericalError("non-finite loss at the base point");
  }

  std::vector<std::string> failures(static_cast<std::size_t>(n));
  parallel_for(n, [&](std::int64_t lo, std::int64_t hi) {
    ActionSequence work = actions;
    std::vector<double> params = base;
    for (std::int64_t i = lo; i < hi; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      auto eval_at = [&](double value) {
        params[idx] = value;
        layout.unpack(params, work);
        const double l = loss(work);
        params[idx] = base[idx];
        return l;
      };
      try {
        double g;
        if (scheme == GradientScheme::CentralFd) {
          const double plus = eval_at(base[idx] + delta);
          const double minus = eval_at(base[idx] - delta);
          g = (plus - minus) / (2.0 * delta);
          if (!std::isfinite(plus) || !std::isfinite(minus)) {
            throw NumericalError("non-finite loss");
          }
        } else {
          const double plus = eval_at(base[idx] + delta);
          g = (plus - base_loss) / delta;
          if (!std::isfinite(plus)) throw NumericalError("non-finite loss");
        }
        grad[idx] = g;
      } catch (const Error& e) {
        const int per_knot = layout.dims_per_knot();
        const int knot = (static_cast<int>(i) / per_knot) % layout.knots;
        failures[idx] = "gradient failed at knot " + std::to_string(knot) + ": " + e.what();
      }
    }
  });
  for (const auto& f : failures) {
    if (!f.empty()) throw NumericalError(f);
  }
  return grad;
}

// ------------------------------------------------------------ optimize_subtask

namespace {

void clamp_actions(ActionSequence& actions, const AdamConfig& cfg) {
  for (auto& row : actions.knots) {
    for (auto& t : row) {
      t.linear = t.linear.cwiseMax(-cfg.v_max).cwiseMin(cfg.v_max);
      t.angular = t.angular.cwiseMax(-cfg.omega_max).cwiseMin(cfg.omega_max);
    }
  }
}

}  // namespace

OptimizeResult optimize_subtask(const SubtaskProblem& problem, const ActionSequence& init,
                                const AdamConfig& config) {
  const auto t_start = std::chrono::steady_clock::now();
  problem.weights.validate();

  OptimizeResult result;
  result.actions = init;
  clamp_actions(result.actions, config);

  ParamLayout layout;
  layout.actuators = static_cast<int>(init.knots.size());
  layout.knots = init.horizon();
  layout.mask = config.twist_mask;

  auto loss_of = [&](const ActionSequence& a) {
    return evaluate_actions(problem, a).total(problem.weights);
  };

  LossBreakdown best_terms = evaluate_actions(problem, result.actions);
  double best_loss = best_terms.total(problem.weights);
  result.report.initial_loss = best_loss;
  result.report.loss_curve.push_back(best_loss);
  result.report.term_curve.push_back(best_terms);

  ActionSequence current = result.actions;
  std::vector<double> params = layout.pack(current);
  std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0);

  for (int iter = 1; iter <= config.max_iters; ++iter) {
    std::vector<double> grad;
    try {
      grad = estimate_gradient(loss_of, current, layout, config.scheme, config.fd_delta);
    } catch (const Error& e) {
      result.report.failure_note = e.what();
      break;
    }

    double grad_norm = 0.0;
    for (double g : grad) grad_norm += g * g;
    grad_norm = std::sqrt(grad_norm);
    result.report.grad_norm_curve.push_back(grad_norm);
    if (grad_norm < config.converged_grad_norm) {
      result.report.converged = true;
      break;
    }

    // Standard Adam first/second-moment recursion with bias correction.
    const double b1t = 1.0 - std::pow(config.beta1, iter);
    const double b2t = 1.0 - std::pow(config.beta2, iter);
    params = layout.pack(current);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
      const double m_hat = m[i] / b1t;
      const double v_hat = v[i] / b2t;
      params[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
    layout.unpack(params, current);
    clamp_actions(current, config);

    LossBreakdown terms;
    try {
      terms = evaluate_actions(problem, current);
    } catch (const Error& e) {
      result.report.failure_note = e.what();
      break;
    }
    const double l = terms.total(problem.weights);
    result.report.loss_curve.push_back(l);
    result.report.term_curve.push_back(terms);
    if (l < best_loss) {
      best_loss = l;
      best_terms = terms;
      result.actions = current;
    }
  }

  result.report.final_loss = best_loss;
  result.report.final_terms = best_terms;
  result.report.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

// ------------------------------------------------------ reference resampling

namespace {

Pose sample_reference(const std::vector<PsagSequence::PoseSample>& ref, double time) {
  if (ref.empty()) return Pose::identity();
  if (time <= ref.front().time) return ref.front().pose;
  if (time >= ref.back().time) return ref.back().pose;
  for (std::size_t i = 1; i < ref.size(); ++i) {
    if (time <= ref[i].time) {
      const double span = ref[i].time - ref[i - 1].time;
      const double u = span > 0.0 ? (time - ref[i - 1].time) / span : 1.0;
      return interpolate(ref[i - 1].pose, ref[i].pose, u);
    }
  }
  return ref.back().pose;
}

}  // namespace

ActionSequence actions_from_reference(
    const std::vector<std::vector<PsagSequence::PoseSample>>& reference_per_actuator, double dt,
    int control_steps, int max_knots) {
  if (control_steps < 1) throw ArgumentError("control_steps must be >= 1");
  ActionSequence actions;
  actions.control_steps = control_steps;

  double t0 = 0.0, t1 = 0.0;
  bool any = false;
  std::vector<std::vector<PsagSequence::PoseSample>> usable(reference_per_actuator.size());
  for (std::size_t a = 0; a < reference_per_actuator.size(); ++a) {
    for (const auto& s : reference_per_actuator[a]) {
      if (s.occluded) continue;  // occluded frames never seed the optimizer
      usable[a].push_back(s);
    }
    if (usable[a].empty() && !reference_per_actuator[a].empty()) {
      usable[a] = reference_per_actuator[a];  // fully occluded: better than nothing
    }
    if (!usable[a].empty()) {
      if (!any) {
        t0 = usable[a].front().time;
        t1 = usable[a].back().time;
        any = true;
      } else {
        t0 = std::min(t0, usable[a].front().time);
        t1 = std::max(t1, usable[a].back().time);
      }
    }
  }
  if (!any || t1 <= t0) {
    // Degenerate reference (single frame): one zero-motion knot.
    actions.knots.assign(reference_per_actuator.size(), std::vector<Twist>(1));
    return actions;
  }

  const double knot_dt = control_steps * dt;
  int knots = static_cast<int>(std::ceil((t1 - t0) / knot_dt - 1e-9));
  knots = std::clamp(knots, 1, max_knots);

  actions.knots.resize(reference_per_actuator.size());
  for (std::size_t a = 0; a < reference_per_actuator.size(); ++a) {
    actions.knots[a].resize(static_cast<std::size_t>(knots));
    for (int k = 0; k < knots; ++k) {
      const Pose from = sample_reference(usable[a], t0 + k * knot_dt);
      const Pose to = sample_reference(usable[a], std::min(t0 + (k + 1) * knot_dt, t1));
      Twist t;
      t.linear = (to.translation - from.translation) / knot_dt;
      t.angular = angular_velocity_between(from.rotation, to.rotation, knot_dt);
      actions.knots[a][static_cast<std::size_t>(k)] = t;
    }
  }
  return actions;
}

// ------------------------------------------------------------ optimize_sequence

SequenceRunResult optimize_sequence(const PsagSequence& seq, const SequenceConfig& config) {
  if (seq.frames.empty()) throw ValidationError("sequence has no frames");
  if (seq.subtasks.empty()) throw ValidationError("sequence has no subtasks");

  const std::vector<int> actuator_ids = {seq.tool_id};

  // Scene manifest gravity is a world vector; the simulation runs in the
  // receptacle frame.
  SceneManifest manifest = seq.manifest;
  manifest.gravity = seq.receptacle_world.rotation.conjugate() * manifest.gravity;

  SequenceRunResult result;
  result.sim_dt = config.scene.dt;
  MpmScene scene = sim::init_scene(seq.frames.front(), manifest, actuator_ids, config.scene);

  // All instance ids of the graph; pairs not required by a goal are
  // penalized when they come into contact.
  std::vector<int> all_ids;
  for (const auto& n : seq.frames.front().nodes) all_ids.push_back(n.instance_id);

  for (std::size_t si = 0; si < seq.subtasks.size(); ++si) {
    const Subtask& sub = seq.subtasks[si];
    const Psag& goal = seq.goal_graph(sub);
    const double duration = std::max(
        seq.frames[static_cast<std::size_t>(sub.end_frame)].timestamp -
            seq.frames[static_cast<std::size_t>(sub.start_frame)].timestamp,
        config.scene.dt);

    const auto steps_total = std::max<std::int64_t>(1, std::llround(duration / config.scene.dt));
    const int knots = static_cast<int>(std::clamp<std::int64_t>(
        (steps_total + config.adam.control_steps - 1) / config.adam.control_steps, 1,
        config.adam.max_knots));
    const int control_steps =
        static_cast<int>((steps_total + knots - 1) / static_cast<std::int64_t>(knots));

    SubtaskProblem problem;
    problem.scene = scene;
    problem.actuator_instance_ids = actuator_ids;
    problem.weights = config.weights;
    problem.contact_threshold = config.contact_threshold;
    problem.contact_band = config.contact_band;
    problem.region_voxel = config.region_voxel;
    problem.region_sigma = config.region_sigma;
    problem.contact_stride = config.contact_stride;

    std::set<std::pair<int, int>> goal_pairs;
    for (const auto& e : goal.edges) {
      problem.contact_goals.push_back({e.a, e.b, e.contact});
      goal_pairs.emplace(std::min(e.a, e.b), std::max(e.a, e.b));
    }
    for (std::size_t i = 0; i < all_ids.size(); ++i) {
      for (std::size_t j = i + 1; j < all_ids.size(); ++j) {
        const auto pair = std::minmax(all_ids[i], all_ids[j]);
        if (!goal_pairs.count({pair.first, pair.second})) {
          problem.forbidden_pairs.push_back({pair.first, pair.second});
        }
      }
    }
    for (const auto& n : goal.nodes) {
      if (n.target_parts > 1) problem.separation_targets.emplace_back(n.instance_id, n.target_parts);
    }

    // Reference trajectories, resampled per sim step. The first subtask's
    // reference is re-rooted at the current actuator pose so chaining drift
    // does not poison the tracking term.
    std::vector<std::vector<PsagSequence::PoseSample>> reference_samples;
    for (int id : actuator_ids) reference_samples.push_back(seq.reference_trajectory(sub, id));

    AdamConfig adam = config.adam;
    adam.control_steps = control_steps;
    ActionSequence init =
        actions_from_reference(reference_samples, config.scene.dt, control_steps, knots);

    const double t0 = seq.frames[static_cast<std::size_t>(sub.start_frame)].timestamp;
    problem.reference.resize(actuator_ids.size());
    for (std::size_t a = 0; a < actuator_ids.size(); ++a) {
      const int total_steps = init.horizon() * init.control_steps;
      problem.reference[a].reserve(static_cast<std::size_t>(total_steps));
      for (int s = 0; s < total_steps; ++s) {
        problem.reference[a].push_back(
            sample_reference(reference_samples[a], t0 + (s + 1) * config.scene.dt));
      }
    }

    OptimizeResult best = optimize_subtask(problem, init, adam);
    result.initial_loss += best.report.initial_loss;
    result.final_loss += best.report.final_loss;

    // Re-run the best actions once to collect observations and chain state.
    auto rolled = sim::rollout(scene, best.actions, best.actions.horizon());
    SubtaskRollout record;
    record.subtask_index = static_cast<int>(si);
    record.start_time = t0;
    record.dt = config.scene.dt;
    record.observations = std::move(rolled.observations);
    result.rollouts.push_back(std::move(record));
    scene = std::move(rolled.final_scene);

    SubtaskOutcome outcome;
    outcome.subtask_index = static_cast<int>(si);
    outcome.actions = std::move(best.actions);
    outcome.report = std::move(best.report);
    result.subtasks.push_back(std::move(outcome));
  }
  result.final_scene = std::move(scene);
  return result;
}

// -------------------------------------------------------------- annotate_forces

void annotate_forces(PsagSequence& seq, const std::vector<SubtaskRollout>& rollouts) {
  for (const auto& roll : rollouts) {
    if (roll.observations.empty()) continue;
    const Subtask& sub = seq.subtasks.at(static_cast<std::size_t>(roll.subtask_index));
    for (int f = sub.start_frame; f <= sub.end_frame; ++f) {
      Psag& g = seq.frames.at(static_cast<std::size_t>(f));
      const double local = g.timestamp - roll.start_time;
      const auto step = static_cast<std::int64_t>(std::llround(local / roll.dt)) - 1;
      const auto idx = static_cast<std::size_t>(
          std::clamp<std::int64_t>(step, 0, static_cast<std::int64_t>(roll.observations.size()) - 1));
      const StepObservation& obs = roll.observations[idx];
      for (auto& edge : g.edges) {
        for (const auto& wrench : obs.actuator_wrench) {
          if (edge.a == wrench.applied_by || edge.b == wrench.applied_by) {
            edge.wrench = wrench;
            break;
          }
        }
      }
    }
  }
}

}  // namespace psag::opt
