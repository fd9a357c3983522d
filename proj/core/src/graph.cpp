#include "psag/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "psag/spatial_index.hpp"

namespace psag {

using nlohmann::json;

const PsagNode* Psag::find_node(int instance_id) const {
  for (const auto& n : nodes) {
    if (n.instance_id == instance_id) return &n;
  }
  return nullptr;
}

const PsagEdge* Psag::find_edge(int a, int b) const {
  for (const auto& e : edges) {
    if (e.connects(a, b)) return &e;
  }
  return nullptr;
}

std::set<std::pair<int, int>> Psag::edge_set() const {
  std::set<std::pair<int, int>> out;
  for (const auto& e : edges) out.emplace(std::min(e.a, e.b), std::max(e.a, e.b));
  return out;
}

const Psag& PsagSequence::goal_graph(const Subtask& s) const {
  return frames.at(static_cast<std::size_t>(s.goal_frame));
}

std::vector<PsagSequence::PoseSample> PsagSequence::reference_trajectory(const Subtask& s,
                                                                         int instance_id) const {
  std::vector<PoseSample> out;
  for (int f = s.start_frame; f <= s.end_frame; ++f) {
    const Psag& g = frames.at(static_cast<std::size_t>(f));
    if (const PsagNode* n = g.find_node(instance_id)) {
      out.push_back({g.timestamp, n->pose, n->occluded});
    }
  }
  return out;
}

// -------------------------------------------------------------- track_objects

namespace {

Vec3 centroid_of(const std::vector<Vec3>& pts) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  return pts.empty() ? c : Vec3(c / static_cast<double>(pts.size()));
}

}  // namespace

TrackSet track_objects(const std::vector<SemanticFrame>& frames, const SceneManifest& manifest,
                       const TrackParams& params) {
  TrackSet out;
  if (frames.empty()) throw ArgumentError("track_objects needs at least one frame");
  const std::size_t nf = frames.size();

  for (const auto& obj : manifest.objects) {
    ObjectTrack track;
    track.instance_id = obj.id;
    track.clouds.resize(nf);
    track.occluded.assign(nf, false);
    bool seen = false;
    for (std::size_t f = 0; f < nf; ++f) {
      track.clouds[f] = frames[f].cloud_of(obj.id);
      if (!track.clouds[f].empty()) seen = true;
    }
    if (!seen) {
      out.warnings.push_back("object " + obj.name + " (id " + std::to_string(obj.id) +
                             ") never observed, dropped");
      continue;
    }
    // Carry the last seen cloud into absent frames (and backwards over a
    // leading gap), flagging them occluded.
    std::size_t first_seen = 0;
    while (track.clouds[first_seen].empty()) ++first_seen;
    for (std::size_t f = 0; f < first_seen; ++f) {
      track.clouds[f] = track.clouds[first_seen];
      track.occluded[f] = true;
    }
    for (std::size_t f = first_seen + 1; f < nf; ++f) {
      if (track.clouds[f].empty()) {
        track.clouds[f] = track.clouds[f - 1];
        track.occluded[f] = true;
      }
    }
    // Label-swap heuristic: a centroid jump far beyond plausible motion.
    for (std::size_t f = 1; f < nf; ++f) {
      if (track.occluded[f] || track.occluded[f - 1]) continue;
      const double jump = (centroid_of(track.clouds[f]) - centroid_of(track.clouds[f - 1])).norm();
      if (jump > params.pose_jump_warn) {
        out.warnings.push_back("object id " + std::to_string(obj.id) + " jumped " +
                               std::to_string(jump) + " m at frame " +
                               std::to_string(frames[f].frame_index) + ", possible label swap");
      }
    }
    out.tracks.emplace(obj.id, std::move(track));
  }
  return out;
}

// --------------------------------------------------------- filter_interaction

InteractionSet filter_interaction(const std::vector<SemanticFrame>& frames,
                                  const SceneManifest& manifest, const InteractionParams& params) {
  const auto hand = manifest.hand_id();
  if (!hand) throw ArgumentError("filter_interaction requires a manifest with a hand");

  // Union-over-frames contact graph between observed objects.
  std::set<int> ids;
  for (const auto& f : frames) {
    for (const auto& p : f.points) ids.insert(p.instance_id);
  }
  std::map<int, std::set<int>> adjacency;
  for (const auto& f : frames) {
    std::map<int, std::vector<Vec3>> clouds;
    for (int id : ids) {
      auto c = f.cloud_of(id);
      if (!c.empty()) clouds[id] = downsample(c, params.downsample_voxel);
    }
    for (auto ia = clouds.begin(); ia != clouds.end(); ++ia) {
      for (auto ib = std::next(ia); ib != clouds.end(); ++ib) {
        if (adjacency[ia->first].count(ib->first)) continue;
        const auto ch = chamfer_closest(ia->second, ib->second, 0.0);
        if (ch.min_distance < params.contact_threshold) {
          adjacency[ia->first].insert(ib->first);
          adjacency[ib->first].insert(ia->first);
        }
      }
    }
  }

  // BFS from the hand, capped at `levels` hops.
  InteractionSet out;
  std::map<int, int> dist;
  std::deque<int> queue{*hand};
  dist[*hand] = 0;
  while (!queue.empty()) {
    const int cur = queue.front();
    queue.pop_front();
    if (dist[cur] >= params.levels) continue;
    for (int next : adjacency[cur]) {
      if (dist.count(next)) continue;
      dist[next] = dist[cur] + 1;
      queue.push_back(next);
    }
  }
  for (const auto& [id, d] : dist) {
    if (id == *hand) continue;
    out.objects.insert(id);
    out.level[id] = d;
  }
  return out;
}

// ------------------------------------------------------- build_graph_sequence

namespace {

// World pose chain for one object: OBB pose at the first frame, then ICP of
// the localized first-frame model against each subsequent frame's cloud.
struct PoseChain {
  std::vector<Pose> poses;
  std::vector<OrientedBox> boxes;
  NunocsMap nunocs;  // world frame, fit on the first frame
};

PoseChain chain_poses(const ObjectTrack& track, const GraphParams& params, Warnings& warnings) {
  PoseChain chain;
  const std::size_t nf = track.clouds.size();
  chain.poses.resize(nf);
  chain.boxes.resize(nf);

  const std::vector<Vec3> first_ds =
      downsample(track.clouds[0], params.interaction.downsample_voxel);
  chain.boxes[0] = fit_obb(track.clouds[0]);
  chain.poses[0] = chain.boxes[0].pose;
  chain.nunocs = fit_nunocs(track.clouds[0]);

  // Model cloud expressed in the object frame of frame 0.
  std::vector<Vec3> model;
  model.reserve(first_ds.size());
  const Pose inv0 = chain.poses[0].inverse();
  for (const auto& p : first_ds) model.push_back(inv0.apply(p));

  for (std::size_t f = 1; f < nf; ++f) {
    chain.boxes[f] = track.occluded[f] ? chain.boxes[f - 1] : fit_obb(track.clouds[f]);
    if (track.occluded[f]) {
      chain.poses[f] = chain.poses[f - 1];
      continue;
    }
    const std::vector<Vec3> target =
        downsample(track.clouds[f], params.interaction.downsample_voxel);
    try {
      const IcpResult icp = icp_refine(model, target, chain.poses[f - 1], params.icp);
      chain.poses[f] = icp.pose;
    } catch (const LowOverlapError&) {
      warnings.push_back("icp low overlap for object id " + std::to_string(track.instance_id) +
                         " at frame " + std::to_string(f) + ", pose carried forward");
      chain.poses[f] = chain.poses[f - 1];
    }
  }
  return chain;
}

double total_pose_change(const std::vector<Pose>& poses) {
  double total = 0.0;
  for (std::size_t f = 1; f < poses.size(); ++f) {
    total += (poses[f].translation - poses[f - 1].translation).norm() +
             0.1 * rotation_angle(poses[f].rotation, poses[f - 1].rotation);
  }
  return total;
}

}  // namespace

PsagSequence build_graph_sequence(const TrackSet& tracks, const InteractionSet& interaction,
                                  const SceneManifest& manifest, const GraphParams& params) {
  PsagSequence seq;
  seq.manifest = manifest;
  seq.warnings = tracks.warnings;

  std::vector<int> ids;
  for (int id : interaction.objects) {
    if (tracks.tracks.count(id)) ids.push_back(id);
  }
  if (ids.empty()) throw ValidationError("no objects of interest to build a graph from");
  const std::size_t nf = tracks.tracks.at(ids.front()).clouds.size();

  // World-frame pose chains.
  std::map<int, PoseChain> chains;
  for (int id : ids) {
    try {
      chains.emplace(id, chain_poses(tracks.tracks.at(id), params, seq.warnings));
    } catch (const Error& e) {
      throw ValidationError("object id " + std::to_string(id) + ": " + e.what());
    }
  }

  // Tool: manifest override, else the most-moving level-1 object.
  if (manifest.tool_id && interaction.objects.count(*manifest.tool_id)) {
    seq.tool_id = *manifest.tool_id;
  } else {
    double best = -1.0;
    for (int id : ids) {
      if (interaction.level.at(id) != 1) continue;
      const double motion = total_pose_change(chains.at(id).poses);
      if (motion > best) {
        best = motion;
        seq.tool_id = id;
      }
    }
    if (seq.tool_id < 0) seq.tool_id = ids.front();
  }

  std::vector<std::map<int, std::vector<Vec3>>> ds_clouds(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    for (int id : ids) {
      ds_clouds[f][id] =
          downsample(tracks.tracks.at(id).clouds[f], params.interaction.downsample_voxel);
    }
  }

  // Receptacle: manifest override, else the most stationary level-2/3 object
  // in contact with the tool at the end of the demonstration.
  if (manifest.receptacle_id && interaction.objects.count(*manifest.receptacle_id)) {
    seq.receptacle_id = *manifest.receptacle_id;
  } else {
    auto candidates_at = [&](std::size_t f) {
      std::vector<int> c;
      for (int id : ids) {
        if (id == seq.tool_id || interaction.level.at(id) < 2) continue;
        const auto ch = chamfer_closest(ds_clouds[f][seq.tool_id], ds_clouds[f][id], 0.0);
        if (ch.min_distance < params.interaction.contact_threshold) c.push_back(id);
      }
      return c;
    };
    std::vector<int> candidates = candidates_at(nf - 1);
    if (candidates.empty()) {
      for (std::size_t f = nf; f-- > 0 && candidates.empty();) candidates = candidates_at(f);
    }
    if (candidates.empty()) {
      for (int id : ids) {
        if (id != seq.tool_id && interaction.level.at(id) >= 2) candidates.push_back(id);
      }
    }
    double best = std::numeric_limits<double>::infinity();
    for (int id : candidates) {
      const double motion = total_pose_change(chains.at(id).poses);
      if (motion < best) {
        best = motion;
        seq.receptacle_id = id;
      }
    }
    if (seq.receptacle_id < 0) {
      seq.warnings.push_back("no receptacle candidate, poses stay in the world frame");
    }
  }

  // Assemble frames in the receptacle frame.
  seq.receptacle_world =
      seq.receptacle_id >= 0 ? chains.at(seq.receptacle_id).poses[0] : Pose::identity();
  const Pose rec0_inv = seq.receptacle_world.inverse();
  for (std::size_t f = 0; f < nf; ++f) {
    Psag g;
    g.frame_index = static_cast<int>(f);
    g.timestamp = static_cast<double>(f) / manifest.frame_rate;
    const Pose rec_pose =
        seq.receptacle_id >= 0 ? chains.at(seq.receptacle_id).poses[f] : Pose::identity();
    const Pose world_to_rec = rec_pose.inverse();

    std::map<int, std::vector<Vec3>> rel_clouds;
    for (int id : ids) {
      std::vector<Vec3> rel;
      rel.reserve(ds_clouds[f][id].size());
      for (const auto& p : ds_clouds[f][id]) rel.push_back(world_to_rec.apply(p));
      rel_clouds[id] = std::move(rel);
    }

    for (int id : ids) {
      const auto& chain = chains.at(id);
      const ObjectInfo& info = manifest.at(id);
      PsagNode node;
      node.instance_id = id;
      node.category = info.category;
      node.is_deformable = info.is_deformable;
      node.occluded = tracks.tracks.at(id).occluded[f];
      node.pose = world_to_rec * chain.poses[f];
      node.obb = chain.boxes[f];
      node.obb.pose = world_to_rec * node.obb.pose;
      // NUNOCS re-expressed in the frame-0 receptacle frame so it composes
      // with retargeting on the transfer side.
      node.nunocs = chain.nunocs;
      node.nunocs.origin = rec0_inv.apply(chain.nunocs.origin);
      node.nunocs.axes = (rec0_inv.rotation * chain.nunocs.axes).normalized();
      node.target_parts = static_cast<int>(
          connected_components(rel_clouds[id], 2.0 * params.interaction.downsample_voxel).size());
      g.nodes.push_back(std::move(node));
    }

    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (std::size_t j = i + 1; j < ids.size(); ++j) {
        const int a = ids[i], b = ids[j];
        try {
          const auto ch = chamfer_closest(rel_clouds[a], rel_clouds[b], params.contact_band);
          if (ch.min_distance >= params.interaction.contact_threshold) continue;
          PsagEdge edge;
          edge.a = std::min(a, b);
          edge.b = std::max(a, b);
          edge.contact = smooth_contact(ch.closest_pairs, rel_clouds[a], rel_clouds[b],
                                        params.region_voxel, params.region_sigma);
          edge.contact.anchor_pair = {edge.a, edge.b};
          g.edges.push_back(std::move(edge));
        } catch (const Error& e) {
          throw ValidationError("frame " + std::to_string(f) + ": " + e.what());
        }
      }
    }
    seq.frames.push_back(std::move(g));
  }

  seq.subtasks = segment_subtasks(seq.frames, params.debounce);
  return seq;
}

// ----------------------------------------------------------- segment_subtasks

std::vector<Subtask> segment_subtasks(const std::vector<Psag>& frames, int debounce) {
  std::vector<Subtask> out;
  if (frames.empty()) throw ArgumentError("segment_subtasks needs at least one graph");
  const int nf = static_cast<int>(frames.size());

  std::vector<std::set<std::pair<int, int>>> sets;
  sets.reserve(frames.size());
  for (const auto& g : frames) sets.push_back(g.edge_set());

  std::vector<int> boundaries;  // frame where a new stable edge set begins
  auto stable = sets[0];
  for (int f = 1; f < nf; ++f) {
    if (sets[f] == stable) continue;
    // The new set must persist `debounce` frames to count as a boundary.
    bool persists = true;
    for (int k = f; k < f + debounce; ++k) {
      if (k >= nf || sets[k] != sets[f]) {
        persists = false;
        break;
      }
    }
    if (persists) {
      boundaries.push_back(f);
      stable = sets[f];
    }
  }

  int start = 0;
  for (int b : boundaries) {
    out.push_back({start, b - 1, b});
    start = b;
  }
  out.push_back({start, nf - 1, nf - 1});
  return out;
}

// -------------------------------------------------------------- serialization

namespace {

json pose_to_json(const Pose& p) {
  return {{"p", {p.translation.x(), p.translation.y(), p.translation.z()}},
          {"q", {p.rotation.w(), p.rotation.x(), p.rotation.y(), p.rotation.z()}}};
}

Pose pose_from_json(const json& j) {
  Pose p;
  const auto& t = j.at("p");
  p.translation = Vec3(t[0], t[1], t[2]);
  const auto& q = j.at("q");
  p.rotation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
  return p;
}

json region_to_json(const ContactRegion& r) {
  json cells = json::array();
  for (int k = 0; k < r.dims.z(); ++k) {
    for (int j = 0; j < r.dims.y(); ++j) {
      for (int i = 0; i < r.dims.x(); ++i) {
        const double w = r.at(i, j, k);
        if (w != 0.0) cells.push_back({i, j, k, w});
      }
    }
  }
  return {{"anchor", {r.anchor_pair.first, r.anchor_pair.second}},
          {"origin", {r.grid_origin.x(), r.grid_origin.y(), r.grid_origin.z()}},
          {"voxel", r.voxel_size},
          {"dims", {r.dims.x(), r.dims.y(), r.dims.z()}},
          {"cells", std::move(cells)}};
}

ContactRegion region_from_json(const json& j) {
  ContactRegion r;
  r.anchor_pair = {j.at("anchor")[0].get<int>(), j.at("anchor")[1].get<int>()};
  const auto& o = j.at("origin");
  r.grid_origin = Vec3(o[0], o[1], o[2]);
  r.voxel_size = j.at("voxel").get<double>();
  const auto& d = j.at("dims");
  r.dims = Eigen::Vector3i(d[0].get<int>(), d[1].get<int>(), d[2].get<int>());
  r.weights.assign(static_cast<std::size_t>(r.dims.prod()), 0.0);
  for (const auto& c : j.at("cells")) {
    r.at(c[0].get<int>(), c[1].get<int>(), c[2].get<int>()) = c[3].get<double>();
  }
  return r;
}

json manifest_to_json(const SceneManifest& m) {
  json objects = json::array();
  for (const auto& o : m.objects) {
    objects.push_back({{"id", o.id},
                       {"name", o.name},
                       {"category", o.category},
                       {"is_hand", o.is_hand},
                       {"is_deformable", o.is_deformable},
                       {"material_preset", o.material_preset}});
  }
  json j = {{"objects", std::move(objects)},
            {"frame_rate", m.frame_rate},
            {"gravity", {m.gravity.x(), m.gravity.y(), m.gravity.z()}},
            {"workspace_bounds",
             {{"min",
               {m.workspace_bounds.min.x(), m.workspace_bounds.min.y(), m.workspace_bounds.min.z()}},
              {"max",
               {m.workspace_bounds.max.x(), m.workspace_bounds.max.y(), m.workspace_bounds.max.z()}}}}};
  if (m.receptacle_id) j["receptacle_id"] = *m.receptacle_id;
  if (m.tool_id) j["tool_id"] = *m.tool_id;
  return j;
}

SceneManifest manifest_from_json(const json& j) {
  SceneManifest m;
  for (const auto& jo : j.at("objects")) {
    ObjectInfo o;
    o.id = jo.at("id").get<int>();
    o.name = jo.at("name").get<std::string>();
    o.category = jo.at("category").get<std::string>();
    o.is_hand = jo.at("is_hand").get<bool>();
    o.is_deformable = jo.at("is_deformable").get<bool>();
    o.material_preset = jo.at("material_preset").get<std::string>();
    m.objects.push_back(std::move(o));
  }
  m.frame_rate = j.at("frame_rate").get<double>();
  const auto& g = j.at("gravity");
  m.gravity = Vec3(g[0], g[1], g[2]);
  const auto& wb = j.at("workspace_bounds");
  m.workspace_bounds.min = Vec3(wb.at("min")[0], wb.at("min")[1], wb.at("min")[2]);
  m.workspace_bounds.max = Vec3(wb.at("max")[0], wb.at("max")[1], wb.at("max")[2]);
  if (j.contains("receptacle_id")) m.receptacle_id = j["receptacle_id"].get<int>();
  if (j.contains("tool_id")) m.tool_id = j["tool_id"].get<int>();
  return m;
}

json nunocs_to_json(const NunocsMap& n) {
  return {{"origin", {n.origin.x(), n.origin.y(), n.origin.z()}},
          {"scale", {n.per_axis_scale.x(), n.per_axis_scale.y(), n.per_axis_scale.z()}},
          {"q", {n.axes.w(), n.axes.x(), n.axes.y(), n.axes.z()}},
          {"degenerate", n.degenerate}};
}

NunocsMap nunocs_from_json(const json& j) {
  NunocsMap n;
  const auto& o = j.at("origin");
  n.origin = Vec3(o[0], o[1], o[2]);
  const auto& s = j.at("scale");
  n.per_axis_scale = Vec3(s[0], s[1], s[2]);
  const auto& q = j.at("q");
  n.axes = Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
  n.degenerate = j.at("degenerate").get<bool>();
  return n;
}

}  // namespace

void save_psag(const PsagSequence& seq, const std::filesystem::path& file) {
  json j;
  j["psag_version"] = 1;
  j["manifest"] = manifest_to_json(seq.manifest);
  j["receptacle_id"] = seq.receptacle_id;
  j["tool_id"] = seq.tool_id;
  j["receptacle_world"] = pose_to_json(seq.receptacle_world);
  json frames = json::array();
  for (const auto& g : seq.frames) {
    json nodes = json::array();
    for (const auto& n : g.nodes) {
      nodes.push_back(
          {{"id", n.instance_id},
           {"category", n.category},
           {"pose", pose_to_json(n.pose)},
           {"obb",
            {{"pose", pose_to_json(n.obb.pose)},
             {"he", {n.obb.half_extents.x(), n.obb.half_extents.y(), n.obb.half_extents.z()}},
             {"degenerate", n.obb.degenerate}}},
           {"nunocs", nunocs_to_json(n.nunocs)},
           {"is_deformable", n.is_deformable},
           {"occluded", n.occluded},
           {"target_parts", n.target_parts}});
    }
    json edges = json::array();
    for (const auto& e : g.edges) {
      json je = {{"a", e.a}, {"b", e.b}, {"contact", region_to_json(e.contact)}};
      if (e.wrench) {
        je["wrench"] = {{"f", {e.wrench->force.x(), e.wrench->force.y(), e.wrench->force.z()}},
                        {"tau", {e.wrench->torque.x(), e.wrench->torque.y(), e.wrench->torque.z()}},
                        {"applied_by", e.wrench->applied_by}};
      }
      edges.push_back(std::move(je));
    }
    frames.push_back({{"frame_index", g.frame_index},
                      {"timestamp", g.timestamp},
                      {"nodes", std::move(nodes)},
                      {"edges", std::move(edges)}});
  }
  j["frames"] = std::move(frames);
  json subtasks = json::array();
  for (const auto& s : seq.subtasks) {
    subtasks.push_back(
        {{"start", s.start_frame}, {"end", s.end_frame}, {"goal_frame", s.goal_frame}});
  }
  j["subtasks"] = std::move(subtasks);

  std::ofstream out(file);
  if (!out) throw FormatError("cannot write psag file: " + file.string());
  out << j.dump(1) << "\n";
}

PsagSequence load_psag(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw FormatError("cannot open psag file: " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("psag parse error in " + file.string() + ": " + e.what());
  }
  if (!j.contains("psag_version") || j["psag_version"].get<int>() != 1) {
    throw FormatError("unsupported psag_version in " + file.string());
  }
  PsagSequence seq;
  try {
    seq.manifest = manifest_from_json(j.at("manifest"));
    seq.receptacle_id = j.at("receptacle_id").get<int>();
    seq.tool_id = j.at("tool_id").get<int>();
    seq.receptacle_world = pose_from_json(j.at("receptacle_world"));
    for (const auto& jf : j.at("frames")) {
      Psag g;
      g.frame_index = jf.at("frame_index").get<int>();
      g.timestamp = jf.at("timestamp").get<double>();
      for (const auto& jn : jf.at("nodes")) {
        PsagNode n;
        n.instance_id = jn.at("id").get<int>();
        n.category = jn.at("category").get<std::string>();
        n.pose = pose_from_json(jn.at("pose"));
        n.obb.pose = pose_from_json(jn.at("obb").at("pose"));
        const auto& he = jn.at("obb").at("he");
        n.obb.half_extents = Vec3(he[0], he[1], he[2]);
        n.obb.degenerate = jn.at("obb").at("degenerate").get<bool>();
        n.nunocs = nunocs_from_json(jn.at("nunocs"));
        n.is_deformable = jn.at("is_deformable").get<bool>();
        n.occluded = jn.at("occluded").get<bool>();
        n.target_parts = jn.at("target_parts").get<int>();
        g.nodes.push_back(std::move(n));
      }
      for (const auto& je : jf.at("edges")) {
        PsagEdge e;
        e.a = je.at("a").get<int>();
        e.b = je.at("b").get<int>();
        e.contact = region_from_json(je.at("contact"));
        if (je.contains("wrench")) {
          WrenchSample w;
          const auto& f = je["wrench"].at("f");
          w.force = Vec3(f[0], f[1], f[2]);
          const auto& tau = je["wrench"].at("tau");
          w.torque = Vec3(tau[0], tau[1], tau[2]);
          w.applied_by = je["wrench"].at("applied_by").get<int>();
          e.wrench = w;
        }
        g.edges.push_back(std::move(e));
      }
      seq.frames.push_back(std::move(g));
    }
    for (const auto& js : j.at("subtasks")) {
      seq.subtasks.push_back(
          {js.at("start").get<int>(), js.at("end").get<int>(), js.at("goal_frame").get<int>()});
    }
  } catch (const json::exception& e) {
    throw FormatError("psag field error in " + file.string() + ": " + e.what());
  }
  return seq;
}

}  // namespace psag
