#include "psag/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace psag {

using nlohmann::json;

PsagSequence run_build_graph(const std::filesystem::path& sequence_dir,
                             const PipelineConfig& config) {
  Sequence seq = load_sequence(sequence_dir, /*demonstration=*/true);
  TrackSet tracks = track_objects(seq.frames, seq.manifest);
  InteractionSet interaction = filter_interaction(seq.frames, seq.manifest,
                                                  config.graph.interaction);
  PsagSequence out = build_graph_sequence(tracks, interaction, seq.manifest, config.graph);
  out.warnings.insert(out.warnings.begin(), seq.warnings.begin(), seq.warnings.end());
  return out;
}

OptimizeStageResult run_optimize(const PsagSequence& seq, const PipelineConfig& config) {
  OptimizeStageResult result;
  result.run = opt::optimize_sequence(seq, config.sequence);
  result.augmented = seq;
  opt::annotate_forces(result.augmented, result.run.rollouts);
  return result;
}

TransferStageResult run_transfer(const PsagSequence& augmented, const xfer::TestScene& test,
                                 const PipelineConfig& config) {
  TransferStageResult result;
  result.warnings = test.warnings;
  const auto grounding = xfer::ground_scene(test);
  result.retargeted = xfer::retarget_psag(augmented, grounding, test.correspondence);
  result.run = xfer::reoptimize(result.retargeted, config.sequence, config.feasibility);

  const auto trajectory = xfer::world_trajectory(result.run, result.retargeted);
  result.program = xfer::emit_program(trajectory, result.retargeted.tool_id, config.gains,
                                      config.program_rate_hz, &result.warnings);
  // Subtask boundaries as target index ranges.
  double t_base = 0.0;
  for (const auto& roll : result.run.rollouts) {
    const double t_end =
        t_base + (roll.observations.empty() ? 0.0 : roll.observations.back().time);
    const int lo = static_cast<int>(std::ceil(t_base * config.program_rate_hz - 1e-9));
    const int hi = std::min(static_cast<int>(std::floor(t_end * config.program_rate_hz + 1e-9)),
                            static_cast<int>(result.program.targets.size()) - 1);
    result.program.subtask_boundaries.emplace_back(lo, hi);
    t_base = t_end;
  }
  return result;
}

// ------------------------------------------------------------------ artifacts

namespace {

json vec3j(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json quatj(const Eigen::Quaterniond& q) { return json::array({q.w(), q.x(), q.y(), q.z()}); }

}  // namespace

void save_rollout(const opt::SequenceRunResult& run, const PsagSequence& seq,
                  const std::filesystem::path& file) {
  json j;
  j["version"] = 1;
  j["dt"] = run.sim_dt;
  json ids = json::array();
  ids.push_back(seq.tool_id);
  j["actuator_ids"] = std::move(ids);

  json subtasks = json::array();
  for (std::size_t si = 0; si < run.subtasks.size(); ++si) {
    const auto& outcome = run.subtasks[si];
    const auto& roll = run.rollouts[si];
    json actions = json::array();
    for (const auto& row : outcome.actions.knots) {
      json knots = json::array();
      for (const auto& t : row) {
        knots.push_back({{"v", vec3j(t.linear)}, {"w", vec3j(t.angular)}});
      }
      actions.push_back(std::move(knots));
    }
    json steps = json::array();
    for (const auto& obs : roll.observations) {
      json actuators = json::array();
      for (std::size_t a = 0; a < obs.actuator_wrench.size(); ++a) {
        actuators.push_back({{"id", obs.actuator_wrench[a].applied_by},
                             {"p", vec3j(obs.actuator_pose[a].translation)},
                             {"q", quatj(obs.actuator_pose[a].rotation)},
                             {"f", vec3j(obs.actuator_wrench[a].force)},
                             {"tau", vec3j(obs.actuator_wrench[a].torque)}});
      }
      steps.push_back({{"t", obs.time}, {"actuators", std::move(actuators)}});
    }
    subtasks.push_back({{"index", outcome.subtask_index},
                        {"start_time", roll.start_time},
                        {"control_steps", outcome.actions.control_steps},
                        {"actions", std::move(actions)},
                        {"steps", std::move(steps)}});
  }
  j["subtasks"] = std::move(subtasks);
  std::ofstream out(file);
  if (!out) throw FormatError("cannot write rollout file: " + file.string());
  out << j.dump(1) << "\n";
}

LoadedRollout load_rollout(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw FormatError("cannot open rollout file: " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("rollout parse error in " + file.string() + ": " + e.what());
  }
  if (!j.contains("version") || j["version"].get<int>() != 1) {
    throw FormatError("unsupported rollout version in " + file.string());
  }
  LoadedRollout out;
  try {
    out.dt = j.at("dt").get<double>();
    for (const auto& id : j.at("actuator_ids")) out.actuator_ids.push_back(id.get<int>());
    for (const auto& js : j.at("subtasks")) {
      LoadedRollout::SubtaskActions sub;
      sub.index = js.at("index").get<int>();
      sub.start_time = js.at("start_time").get<double>();
      sub.actions.control_steps = js.at("control_steps").get<int>();
      for (const auto& row : js.at("actions")) {
        std::vector<sim::Twist> knots;
        for (const auto& jt : row) {
          sim::Twist t;
          const auto& v = jt.at("v");
          t.linear = Vec3(v[0], v[1], v[2]);
          const auto& w = jt.at("w");
          t.angular = Vec3(w[0], w[1], w[2]);
          knots.push_back(t);
        }
        sub.actions.knots.push_back(std::move(knots));
      }
      out.subtasks.push_back(std::move(sub));
    }
  } catch (const json::exception& e) {
    throw FormatError("rollout field error in " + file.string() + ": " + e.what());
  }
  return out;
}

void save_report(const opt::SequenceRunResult& run, const std::filesystem::path& file) {
  json j;
  j["version"] = 1;
  j["total_initial_loss"] = run.initial_loss;
  j["total_final_loss"] = run.final_loss;
  json subtasks = json::array();
  for (const auto& outcome : run.subtasks) {
    const auto& r = outcome.report;
    json terms = {{"contact", json::array()},
                  {"pose", json::array()},
                  {"energy", json::array()},
                  {"separation", json::array()}};
    for (const auto& t : r.term_curve) {
      terms["contact"].push_back(t.contact);
      terms["pose"].push_back(t.pose);
      terms["energy"].push_back(t.energy);
      terms["separation"].push_back(t.separation);
    }
    json js = {{"index", outcome.subtask_index},
               {"initial_loss", r.initial_loss},
               {"final_loss", r.final_loss},
               {"converged", r.converged},
               {"wall_time_sec", r.wall_time_sec},
               {"iterations", r.loss_curve.empty() ? 0 : r.loss_curve.size() - 1},
               {"loss_curve", r.loss_curve},
               {"grad_norm", r.grad_norm_curve},
               {"terms", std::move(terms)},
               {"final_terms",
                {{"contact", r.final_terms.contact},
                 {"pose", r.final_terms.pose},
                 {"energy", r.final_terms.energy},
                 {"separation", r.final_terms.separation}}}};
    if (!r.failure_note.empty()) js["failure_note"] = r.failure_note;
    subtasks.push_back(std::move(js));
  }
  j["subtasks"] = std::move(subtasks);
  std::ofstream out(file);
  if (!out) throw FormatError("cannot write report file: " + file.string());
  out << j.dump(1) << "\n";
}

int dump_scene_ply(const PsagSequence& seq, const LoadedRollout& rollout,
                   const std::filesystem::path& out_dir, int every, const PipelineConfig& config) {
  if (every < 1) throw ArgumentError("dump interval must be >= 1");
  std::filesystem::create_directories(out_dir);

  SceneManifest manifest = seq.manifest;
  manifest.gravity = seq.receptacle_world.rotation.conjugate() * manifest.gravity;
  sim::SceneParams scene_params = config.sequence.scene;
  sim::MpmScene scene =
      sim::init_scene(seq.frames.front(), manifest, {seq.tool_id}, scene_params);

  int written = 0;
  char name[32];
  for (const auto& sub : rollout.subtasks) {
    auto result = sim::rollout(scene, sub.actions, sub.actions.horizon(),
                               [&](int step, const sim::MpmScene& s) {
                                 if (step % every != 0) return;
                                 std::snprintf(name, sizeof(name), "%06d.ply", written);
                                 sim::write_ply(s, out_dir / name);
                                 ++written;
                               });
    scene = std::move(result.final_scene);
  }
  return written;
}

void plot_report_svg(const std::filesystem::path& report_file,
                     const std::filesystem::path& svg_file) {
  std::ifstream in(report_file);
  if (!in) throw FormatError("cannot open report file: " + report_file.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("report parse error: " + std::string(e.what()));
  }

  // Concatenate iteration curves across subtasks.
  std::map<std::string, std::vector<double>> series;
  for (const auto& js : j.at("subtasks")) {
    const auto& loss = js.at("loss_curve");
    for (const auto& v : loss) series["total"].push_back(v.get<double>());
    const auto& terms = js.at("terms");
    for (const char* term : {"contact", "pose", "energy", "separation"}) {
      for (const auto& v : terms.at(term)) series[term].push_back(v.get<double>());
    }
  }
  if (series["total"].empty()) throw ValidationError("report has no iterations to plot");

  const double width = 640.0, height = 400.0, margin = 40.0;
  double lo = 0.0, hi = 0.0;
  std::size_t max_len = 0;
  for (const auto& [_, values] : series) {
    for (double v : values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    max_len = std::max(max_len, values.size());
  }
  if (hi <= lo) hi = lo + 1.0;

  const std::map<std::string, std::string> colors = {{"total", "#000000"},
                                                     {"contact", "#c0392b"},
                                                     {"pose", "#2980b9"},
                                                     {"energy", "#27ae60"},
                                                     {"separation", "#8e44ad"}};
  std::ofstream out(svg_file);
  if (!out) throw FormatError("cannot write SVG file: " + svg_file.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  double label_y = margin;
  for (const auto& [term, values] : series) {
    if (values.empty()) continue;
    out << "<polyline fill=\"none\" stroke=\"" << colors.at(term)
        << "\" stroke-width=\"1.5\" data-term=\"" << term << "\" points=\"";
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double x =
          margin + (width - 2 * margin) * (max_len > 1 ? double(i) / (max_len - 1) : 0.0);
      const double y = height - margin - (height - 2 * margin) * (values[i] - lo) / (hi - lo);
      out << x << "," << y << " ";
    }
    out << "\"/>\n";
    out << "<text x=\"" << width - margin + 4 << "\" y=\"" << label_y << "\" font-size=\"10\" fill=\""
        << colors.at(term) << "\">" << term << "</text>\n";
    label_y += 12.0;
  }
  out << "</svg>\n";
}

}  // namespace psag
