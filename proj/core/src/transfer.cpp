#include "psag/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace psag::xfer {

using nlohmann::json;

// ------------------------------------------------------------ load_test_scene

TestScene load_test_scene(const std::filesystem::path& dir, const PsagSequence* demo) {
  TestScene scene;
  Sequence seq = load_sequence(dir, /*demonstration=*/false);
  if (seq.frames.size() != 1) {
    scene.warnings.push_back("test scene has " + std::to_string(seq.frames.size()) +
                             " frames, using the first");
  }
  scene.manifest = std::move(seq.manifest);
  scene.frame = std::move(seq.frames.front());
  for (auto& w : seq.warnings) scene.warnings.push_back(std::move(w));

  const auto corr_path = dir / "correspondence.json";
  if (std::filesystem::exists(corr_path)) {
    std::ifstream in(corr_path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw FormatError("correspondence parse error: " + std::string(e.what()));
    }
    for (const auto& [key, value] : j.items()) {
      scene.correspondence[std::stoi(key)] = value.get<int>();
    }
  } else if (demo) {
    // Match by unique category.
    for (const auto& node : demo->frames.front().nodes) {
      const ObjectInfo& demo_obj = demo->manifest.at(node.instance_id);
      int match = -1;
      int count = 0;
      for (const auto& test_obj : scene.manifest.objects) {
        if (test_obj.category == demo_obj.category) {
          match = test_obj.id;
          ++count;
        }
      }
      if (count == 1) scene.correspondence[node.instance_id] = match;
    }
  }
  return scene;
}

// --------------------------------------------------------------- ground_scene

std::map<int, GroundedObject> ground_scene(const TestScene& test) {
  std::map<int, GroundedObject> out;
  std::set<int> ids;
  for (const auto& p : test.frame.points) ids.insert(p.instance_id);
  for (int id : ids) {
    GroundedObject g;
    g.cloud = test.frame.cloud_of(id);
    try {
      g.obb = fit_obb(g.cloud);
      g.nunocs = fit_nunocs(g.cloud);
    } catch (const Error& e) {
      throw ValidationError("grounding failed for test object id " + std::to_string(id) + ": " +
                            e.what());
    }
    g.pose = g.obb.pose;
    out.emplace(id, std::move(g));
  }
  return out;
}

// -------------------------------------------------------------- retarget_psag

namespace {

NunocsMap to_receptacle_frame(const NunocsMap& world, const Pose& world_to_rec) {
  NunocsMap rel = world;
  rel.origin = world_to_rec.apply(world.origin);
  rel.axes = (world_to_rec.rotation * world.axes).normalized();
  return rel;
}

double mobility(const PsagSequence& seq, int id) {
  double total = 0.0;
  const Pose* prev = nullptr;
  for (const auto& frame : seq.frames) {
    if (const PsagNode* n = frame.find_node(id)) {
      if (prev) {
        total += (n->pose.translation - prev->translation).norm() +
                 0.1 * rotation_angle(n->pose.rotation, prev->rotation);
      }
      prev = &n->pose;
    }
  }
  return total;
}

// Re-splat a region through an affine point map onto a fresh grid.
ContactRegion remap_region(const ContactRegion& src, const std::function<Vec3(const Vec3&)>& map) {
  std::vector<Vec3> centers;
  std::vector<double> weights;
  for (int k = 0; k < src.dims.z(); ++k) {
    for (int j = 0; j < src.dims.y(); ++j) {
      for (int i = 0; i < src.dims.x(); ++i) {
        const double w = src.at(i, j, k);
        if (w > 0.0) {
          centers.push_back(map(src.voxel_center(i, j, k)));
          weights.push_back(w);
        }
      }
    }
  }
  const double h = src.voxel_size;
  Vec3 lo = centers.front(), hi = centers.front();
  for (const auto& c : centers) {
    lo = lo.cwiseMin(c);
    hi = hi.cwiseMax(c);
  }
  ContactRegion out;
  out.anchor_pair = src.anchor_pair;
  out.voxel_size = h;
  Eigen::Vector3i lo_cell, hi_cell;
  for (int d = 0; d < 3; ++d) {
    lo_cell[d] = static_cast<int>(std::floor(lo[d] / h)) - 2;
    hi_cell[d] = static_cast<int>(std::floor(hi[d] / h)) + 3;
  }
  out.grid_origin = Vec3(lo_cell.x() * h, lo_cell.y() * h, lo_cell.z() * h);
  out.dims = hi_cell - lo_cell + Eigen::Vector3i::Ones();
  out.weights.assign(static_cast<std::size_t>(out.dims.prod()), 0.0);
  for (std::size_t n = 0; n < centers.size(); ++n) {
    const Vec3 u = (centers[n] - out.grid_origin) / h - Vec3::Constant(0.5);
    const Eigen::Vector3i base(static_cast<int>(std::floor(u.x())),
                               static_cast<int>(std::floor(u.y())),
                               static_cast<int>(std::floor(u.z())));
    const Vec3 f = u - base.cast<double>();
    for (int dz = 0; dz < 2; ++dz) {
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const double w = (dx ? f.x() : 1.0 - f.x()) * (dy ? f.y() : 1.0 - f.y()) *
                           (dz ? f.z() : 1.0 - f.z());
          out.at(base.x() + dx, base.y() + dy, base.z() + dz) += w * weights[n];
        }
      }
    }
  }
  const double total = out.sum();
  for (auto& w : out.weights) w /= total;
  return out;
}

}  // namespace

PsagSequence retarget_psag(const PsagSequence& demo, const std::map<int, GroundedObject>& grounding,
                           const std::map<int, int>& correspondence) {
  if (demo.frames.empty()) throw ArgumentError("retarget_psag needs a non-empty sequence");

  // The correspondence must cover every object of interest.
  for (const auto& node : demo.frames.front().nodes) {
    auto it = correspondence.find(node.instance_id);
    if (it == correspondence.end()) {
      throw ArgumentError("missing correspondence for demo object id " +
                          std::to_string(node.instance_id));
    }
    if (!grounding.count(it->second)) {
      throw ArgumentError("test grounding has no object id " + std::to_string(it->second));
    }
  }

  const int test_receptacle = demo.receptacle_id >= 0
                                  ? correspondence.at(demo.receptacle_id)
                                  : -1;
  const Pose receptacle_world =
      test_receptacle >= 0 ? grounding.at(test_receptacle).pose : Pose::identity();
  const Pose world_to_rec = receptacle_world.inverse();

  // Demo-side NUNOCS maps live in the demo receptacle frame; recover the
  // matching test-side maps in the test receptacle frame.
  std::map<int, NunocsMap> demo_maps, test_maps;
  for (const auto& node : demo.frames.front().nodes) {
    demo_maps[node.instance_id] = node.nunocs;
    test_maps[node.instance_id] =
        to_receptacle_frame(grounding.at(correspondence.at(node.instance_id)).nunocs, world_to_rec);
  }

  std::map<int, double> demo_mobility;
  for (const auto& node : demo.frames.front().nodes) {
    demo_mobility[node.instance_id] = mobility(demo, node.instance_id);
  }

  PsagSequence out;
  out.manifest = demo.manifest;
  // Rewrite manifest object ids onto the test instances.
  for (auto& obj : out.manifest.objects) {
    auto it = correspondence.find(obj.id);
    if (it != correspondence.end()) obj.id = it->second;
  }
  out.receptacle_id = test_receptacle;
  out.tool_id = demo.tool_id >= 0 ? correspondence.at(demo.tool_id) : -1;
  out.receptacle_world = receptacle_world;
  out.subtasks = demo.subtasks;

  auto map_pose = [&](int demo_id, const Pose& pose) {
    return test_maps.at(demo_id).invert(demo_maps.at(demo_id).apply(pose));
  };

  for (const auto& frame : demo.frames) {
    Psag g;
    g.frame_index = frame.frame_index;
    g.timestamp = frame.timestamp;
    for (const auto& node : frame.nodes) {
      PsagNode n = node;
      n.instance_id = correspondence.at(node.instance_id);
      n.pose = map_pose(node.instance_id, node.pose);
      n.obb.pose = map_pose(node.instance_id, node.obb.pose);
      // Half extents scale by the per-axis NUNOCS ratio.
      const Vec3 ratio = demo_maps.at(node.instance_id)
                             .per_axis_scale.cwiseQuotient(test_maps.at(node.instance_id).per_axis_scale);
      n.obb.half_extents = node.obb.half_extents.cwiseProduct(ratio);
      n.nunocs = test_maps.at(node.instance_id);
      g.nodes.push_back(std::move(n));
    }
    for (const auto& edge : frame.edges) {
      PsagEdge e;
      const int ta = correspondence.at(edge.a);
      const int tb = correspondence.at(edge.b);
      e.a = std::min(ta, tb);
      e.b = std::max(ta, tb);
      e.wrench = edge.wrench;
      if (e.wrench) e.wrench->applied_by = correspondence.at(edge.wrench->applied_by);

      // Region position follows the steadier (support) endpoint so the
      // contact lands on the test-scene geometry; the footprint follows the
      // moving endpoint so it stays reachable by the actual tool.
      const int mover =
          demo_mobility[edge.a] >= demo_mobility[edge.b] ? edge.a : edge.b;
      const int support = mover == edge.a ? edge.b : edge.a;
      const Vec3 demo_centroid = edge.contact.centroid();
      const Vec3 new_centroid = test_maps.at(support).invert(demo_maps.at(support).apply(demo_centroid));
      const NunocsMap& dm = demo_maps.at(mover);
      const NunocsMap& tm = test_maps.at(mover);
      auto map_point = [&](const Vec3& p) {
        const Vec3 offset = p - demo_centroid;
        const Vec3 canonical = (dm.axes.conjugate() * offset).cwiseProduct(dm.per_axis_scale);
        return new_centroid + tm.axes * canonical.cwiseQuotient(tm.per_axis_scale);
      };
      e.contact = remap_region(edge.contact, map_point);
      e.contact.anchor_pair = {e.a, e.b};
      g.edges.push_back(std::move(e));
    }
    out.frames.push_back(std::move(g));
  }
  return out;
}

// ------------------------------------------------------------ check_feasibility

void check_feasibility(const PsagSequence& seq, const FeasibilityParams& params) {
  if (seq.frames.empty() || seq.tool_id < 0) return;
  const Psag& frame = seq.frames.front();
  const PsagNode* tool = frame.find_node(seq.tool_id);
  if (!tool) return;
  const auto samples = tool->obb.surface_samples(4.0 * kMinHalfExtent + 0.01);
  for (const auto& node : frame.nodes) {
    if (node.instance_id == seq.tool_id) continue;
    double deepest = 0.0;
    for (const auto& s : samples) {
      deepest = std::min(deepest, node.obb.sdf(s));
    }
    if (deepest < -params.penetration_tol) {
      throw ValidationError("infeasible correspondence: tool starts " +
                            std::to_string(-deepest) + " m inside object id " +
                            std::to_string(node.instance_id));
    }
  }
}

opt::SequenceRunResult reoptimize(const PsagSequence& retargeted, const opt::SequenceConfig& config,
                                  const FeasibilityParams& feasibility) {
  check_feasibility(retargeted, feasibility);
  return opt::optimize_sequence(retargeted, config);
}

// -------------------------------------------------------------- hybrid_target

Vec3 hybrid_target(const Vec3& p_sim, const WrenchSample& f_sim, const WrenchSample& f_real,
                   double k1, double k2) {
  return k1 * p_sim + k2 * (f_real.force - f_sim.force);
}

// ---------------------------------------------------------------- emit_program

void ControllerProgram::validate() const {
  if (targets.empty()) throw ValidationError("controller program is empty");
  if (std::abs(targets.front().time) > 1e-12) {
    throw ValidationError("controller program must start at t=0");
  }
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto& t = targets[i];
    if (i > 0 && !(t.time > targets[i - 1].time)) {
      throw ValidationError("controller program timestamps must be strictly increasing");
    }
    if (!(t.k1 > 0.0) || !std::isfinite(t.k1) || !std::isfinite(t.k2)) {
      throw ValidationError("controller gains must be finite with k1 > 0");
    }
    if (!t.position.allFinite() || !t.orientation.coeffs().allFinite()) {
      throw ValidationError("controller target has non-finite pose");
    }
  }
}

std::vector<TrajectorySample> world_trajectory(const opt::SequenceRunResult& run,
                                               const PsagSequence& seq) {
  std::vector<TrajectorySample> out;
  const Pose& world = seq.receptacle_world;
  const int tool = seq.tool_id;

  // Initial pose at t=0 from the sequence itself.
  if (const PsagNode* n = seq.frames.front().find_node(tool)) {
    TrajectorySample s;
    s.time = 0.0;
    s.pose = world * n->pose;
    s.wrench.applied_by = tool;
    out.push_back(s);
  }

  double t_base = 0.0;
  for (const auto& roll : run.rollouts) {
    for (const auto& obs : roll.observations) {
      TrajectorySample s;
      s.time = t_base + obs.time;
      for (std::size_t a = 0; a < obs.actuator_wrench.size(); ++a) {
        if (obs.actuator_wrench[a].applied_by == tool) {
          s.pose = world * obs.actuator_pose[a];
          s.wrench.applied_by = tool;
          s.wrench.force = world.rotation * obs.actuator_wrench[a].force;
          s.wrench.torque = world.rotation * obs.actuator_wrench[a].torque;
        }
      }
      out.push_back(s);
    }
    if (!roll.observations.empty()) t_base += roll.observations.back().time;
  }
  return out;
}

ControllerProgram emit_program(const std::vector<TrajectorySample>& trajectory, int tool_id,
                               const Gains& gains, double rate_hz, Warnings* warnings) {
  if (trajectory.empty()) throw ArgumentError("emit_program needs a non-empty trajectory");
  if (!(rate_hz > 0.0)) throw ArgumentError("emit_program rate must be positive");

  const double t_end = trajectory.back().time;
  double sim_dt = t_end;
  for (std::size_t i = 1; i < trajectory.size(); ++i) {
    sim_dt = std::min(sim_dt, trajectory[i].time - trajectory[i - 1].time);
  }
  if (warnings && sim_dt > 0.0 && 1.0 / rate_hz < sim_dt) {
    warnings->push_back("program rate " + std::to_string(rate_hz) +
                        " Hz exceeds the simulation resolution, upsampling by interpolation");
  }

  ControllerProgram program;
  program.tool_id = tool_id;
  program.rate_hz = rate_hz;

  const auto count = static_cast<std::int64_t>(std::floor(t_end * rate_hz + 1e-9)) + 1;
  std::size_t cursor = 1;
  for (std::int64_t n = 0; n < count; ++n) {
    const double t = static_cast<double>(n) / rate_hz;
    while (cursor < trajectory.size() - 1 && trajectory[cursor].time < t) ++cursor;
    const auto& lo = trajectory[cursor - 1];
    const auto& hi = trajectory[std::min(cursor, trajectory.size() - 1)];
    const double span = hi.time - lo.time;
    const double u = span > 0.0 ? std::clamp((t - lo.time) / span, 0.0, 1.0) : 0.0;

    ControllerTarget target;
    target.time = t;
    const Pose pose = interpolate(lo.pose, hi.pose, u);
    target.position = pose.translation;
    target.orientation = pose.rotation;
    target.reference_wrench.force = (1.0 - u) * lo.wrench.force + u * hi.wrench.force;
    target.reference_wrench.torque = (1.0 - u) * lo.wrench.torque + u * hi.wrench.torque;
    target.reference_wrench.applied_by = tool_id;
    target.k1 = gains.k1;
    target.k2 = gains.k2;
    program.targets.push_back(std::move(target));
  }
  program.validate();
  return program;
}

// ----------------------------------------------------------------- program io

void save_program(const ControllerProgram& program, const std::filesystem::path& file) {
  program.validate();
  json j;
  j["version"] = 1;
  j["tool_id"] = program.tool_id;
  j["frame"] = program.frame;
  j["rate_hz"] = program.rate_hz;
  if (!program.task_name.empty()) j["task"] = program.task_name;
  if (!program.subtask_boundaries.empty()) {
    json bounds = json::array();
    for (const auto& [a, b] : program.subtask_boundaries) bounds.push_back({a, b});
    j["subtask_boundaries"] = std::move(bounds);
  }
  json targets = json::array();
  for (const auto& t : program.targets) {
    targets.push_back({{"t", t.time},
                       {"p", {t.position.x(), t.position.y(), t.position.z()}},
                       {"q",
                        {t.orientation.w(), t.orientation.x(), t.orientation.y(),
                         t.orientation.z()}},
                       {"f",
                        {t.reference_wrench.force.x(), t.reference_wrench.force.y(),
                         t.reference_wrench.force.z()}},
                       {"tau",
                        {t.reference_wrench.torque.x(), t.reference_wrench.torque.y(),
                         t.reference_wrench.torque.z()}},
                       {"k1", t.k1},
                       {"k2", t.k2}});
  }
  j["targets"] = std::move(targets);
  std::ofstream out(file);
  if (!out) throw FormatError("cannot write program file: " + file.string());
  out << j.dump(1) << "\n";
}

ControllerProgram load_program(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw FormatError("cannot open program file: " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("program parse error in " + file.string() + ": " + e.what());
  }
  if (!j.contains("version") || j["version"].get<int>() != 1) {
    throw FormatError("unsupported program version in " + file.string());
  }
  ControllerProgram program;
  try {
    program.tool_id = j.at("tool_id").get<int>();
    program.frame = j.at("frame").get<std::string>();
    program.rate_hz = j.at("rate_hz").get<double>();
    if (j.contains("task")) program.task_name = j["task"].get<std::string>();
    if (j.contains("subtask_boundaries")) {
      for (const auto& b : j["subtask_boundaries"]) {
        program.subtask_boundaries.emplace_back(b[0].get<int>(), b[1].get<int>());
      }
    }
    for (const auto& jt : j.at("targets")) {
      ControllerTarget t;
      t.time = jt.at("t").get<double>();
      const auto& p = jt.at("p");
      t.position = Vec3(p[0], p[1], p[2]);
      const auto& q = jt.at("q");
      t.orientation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
      const auto& f = jt.at("f");
      t.reference_wrench.force = Vec3(f[0], f[1], f[2]);
      const auto& tau = jt.at("tau");
      t.reference_wrench.torque = Vec3(tau[0], tau[1], tau[2]);
      t.reference_wrench.applied_by = program.tool_id;
      t.k1 = jt.at("k1").get<double>();
      t.k2 = jt.at("k2").get<double>();
      program.targets.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw FormatError("program field error in " + file.string() + ": " + e.what());
  }
  program.validate();
  return program;
}

}  // namespace psag::xfer
