#include "psag/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace psag {

using nlohmann::json;

std::vector<Vec3> SemanticFrame::cloud_of(int instance_id) const {
  std::vector<Vec3> out;
  for (const auto& p : points) {
    if (p.instance_id == instance_id) out.push_back(p.position);
  }
  return out;
}

const ObjectInfo* SceneManifest::find(int id) const {
  for (const auto& o : objects) {
    if (o.id == id) return &o;
  }
  return nullptr;
}

const ObjectInfo& SceneManifest::at(int id) const {
  if (const ObjectInfo* o = find(id)) return *o;
  throw ValidationError("manifest has no object with id " + std::to_string(id));
}

std::optional<int> SceneManifest::hand_id() const {
  for (const auto& o : objects) {
    if (o.is_hand) return o.id;
  }
  return std::nullopt;
}

void SceneManifest::validate(bool demonstration) const {
  std::set<int> ids;
  int hands = 0;
  for (const auto& o : objects) {
    if (o.id < 0) throw ValidationError("negative instance id " + std::to_string(o.id));
    if (!ids.insert(o.id).second) {
      throw ValidationError("duplicate instance id " + std::to_string(o.id));
    }
    if (o.is_hand) ++hands;
    if (o.is_deformable && o.material_preset.empty()) {
      throw ValidationError("deformable object " + o.name + " has no material preset");
    }
  }
  if (objects.empty()) throw ValidationError("manifest has no objects");
  if (demonstration && hands != 1) {
    throw ValidationError("demonstration manifest must flag exactly one hand, found " +
                          std::to_string(hands));
  }
  if (!demonstration && hands != 0) {
    throw ValidationError("test-scene manifest must not contain a hand");
  }
  if (!(frame_rate > 0.0)) throw ValidationError("frame_rate must be positive");
  if ((workspace_bounds.max.array() <= workspace_bounds.min.array()).any()) {
    throw ValidationError("workspace_bounds must have positive extent");
  }
}

namespace {

Vec3 vec3_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw FormatError(std::string(what) + " must be a 3-array");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json vec3_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

SceneManifest load_manifest(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw FormatError("cannot open manifest: " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("manifest parse error in " + file.string() + ": " + e.what());
  }
  SceneManifest m;
  try {
    for (const auto& jo : j.at("objects")) {
      ObjectInfo o;
      o.id = jo.at("id").get<int>();
      o.name = jo.at("name").get<std::string>();
      o.category = jo.value("category", o.name);
      o.is_hand = jo.value("is_hand", false);
      o.is_deformable = jo.value("is_deformable", false);
      o.material_preset = jo.value("material_preset", std::string());
      m.objects.push_back(std::move(o));
    }
    m.frame_rate = j.at("frame_rate").get<double>();
    if (j.contains("gravity")) m.gravity = vec3_from_json(j["gravity"], "gravity");
    const auto& wb = j.at("workspace_bounds");
    m.workspace_bounds.min = vec3_from_json(wb.at("min"), "workspace_bounds.min");
    m.workspace_bounds.max = vec3_from_json(wb.at("max"), "workspace_bounds.max");
    if (j.contains("receptacle_id")) m.receptacle_id = j["receptacle_id"].get<int>();
    if (j.contains("tool_id")) m.tool_id = j["tool_id"].get<int>();
  } catch (const json::exception& e) {
    throw FormatError("manifest field error in " + file.string() + ": " + e.what());
  }
  return m;
}

void save_manifest(const SceneManifest& manifest, const std::filesystem::path& file) {
  json j;
  j["objects"] = json::array();
  for (const auto& o : manifest.objects) {
    json jo;
    jo["id"] = o.id;
    jo["name"] = o.name;
    jo["category"] = o.category;
    jo["is_hand"] = o.is_hand;
    jo["is_deformable"] = o.is_deformable;
    jo["material_preset"] = o.material_preset;
    j["objects"].push_back(std::move(jo));
  }
  j["frame_rate"] = manifest.frame_rate;
  j["gravity"] = vec3_to_json(manifest.gravity);
  j["workspace_bounds"] = {{"min", vec3_to_json(manifest.workspace_bounds.min)},
                           {"max", vec3_to_json(manifest.workspace_bounds.max)}};
  if (manifest.receptacle_id) j["receptacle_id"] = *manifest.receptacle_id;
  if (manifest.tool_id) j["tool_id"] = *manifest.tool_id;
  std::ofstream out(file);
  if (!out) throw FormatError("cannot write manifest: " + file.string());
  out << j.dump(2) << "\n";
}

namespace {

struct CsvRow {
  double x, y, z, confidence;
  int instance_id;
  bool has_confidence;
};

bool parse_csv_row(const std::string& line, CsvRow& row) {
  double vals[5];
  int n = 0;
  const char* p = line.c_str();
  const char* end = p + line.size();
  while (p < end && n < 5) {
    char* next = nullptr;
    vals[n] = std::strtod(p, &next);
    if (next == p) return false;
    ++n;
    p = next;
    while (p < end && (*p == ',' || *p == ' ' || *p == '\t')) ++p;
  }
  if (n < 4) return false;
  row.x = vals[0];
  row.y = vals[1];
  row.z = vals[2];
  row.instance_id = static_cast<int>(std::llround(vals[3]));
  row.has_confidence = n >= 5;
  row.confidence = row.has_confidence ? vals[4] : 1.0;
  return true;
}

SemanticFrame load_frame_csv(const std::filesystem::path& file, int frame_index, double frame_rate) {
  std::ifstream in(file);
  if (!in) throw FormatError("cannot open frame file: " + file.string());
  SemanticFrame f;
  f.frame_index = frame_index;
  f.timestamp = frame_index / frame_rate;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    if (first) {
      first = false;
      if (line.find("x") != std::string::npos && line.find("instance_id") != std::string::npos) {
        continue;  // header row
      }
    }
    CsvRow row;
    if (!parse_csv_row(line, row)) {
      throw FormatError("bad CSV row in " + file.string() + ": '" + line + "'");
    }
    PointRecord pr;
    pr.position = Vec3(row.x, row.y, row.z);
    pr.instance_id = row.instance_id;
    pr.confidence = row.confidence;
    if (!pr.position.allFinite()) {
      throw ValidationError("non-finite point in frame " + std::to_string(frame_index));
    }
    f.points.push_back(pr);
  }
  return f;
}

}  // namespace

Sequence load_sequence(const std::filesystem::path& dir, bool demonstration) {
  namespace fs = std::filesystem;
  Sequence seq;
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) {
    throw FormatError("missing manifest: " + manifest_path.string());
  }
  seq.manifest = load_manifest(manifest_path);
  seq.manifest.validate(demonstration);

  const fs::path frames_dir = dir / "frames";
  if (!fs::exists(frames_dir)) throw FormatError("missing frames directory: " + frames_dir.string());

  std::vector<std::pair<int, fs::path>> frame_files;
  for (const auto& entry : fs::directory_iterator(frames_dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
    const std::string stem = entry.path().stem().string();
    int idx = 0;
    auto [ptr, ec] = std::from_chars(stem.data(), stem.data() + stem.size(), idx);
    if (ec != std::errc() || ptr != stem.data() + stem.size()) {
      throw FormatError("frame file name is not a number: " + entry.path().string());
    }
    if (idx < 0) throw ValidationError("negative frame index " + stem);
    frame_files.emplace_back(idx, entry.path());
  }
  if (frame_files.empty()) throw FormatError("no frame files in " + frames_dir.string());
  std::sort(frame_files.begin(), frame_files.end());
  for (std::size_t i = 1; i < frame_files.size(); ++i) {
    if (frame_files[i].first == frame_files[i - 1].first) {
      throw ValidationError("duplicate frame index " + std::to_string(frame_files[i].first));
    }
  }

  std::size_t dropped = 0;
  double prev_ts = -1.0;
  for (const auto& [idx, path] : frame_files) {
    SemanticFrame f = load_frame_csv(path, idx, seq.manifest.frame_rate);
    if (f.timestamp < prev_ts) {
      throw ValidationError("non-monotone timestamps at frame " + std::to_string(idx));
    }
    prev_ts = f.timestamp;
    std::vector<PointRecord> kept;
    kept.reserve(f.points.size());
    for (const auto& p : f.points) {
      if (!seq.manifest.find(p.instance_id)) {
        throw ValidationError("frame " + std::to_string(idx) + " references unknown instance_id " +
                              std::to_string(p.instance_id));
      }
      if (seq.manifest.workspace_bounds.contains(p.position)) {
        kept.push_back(p);
      } else {
        ++dropped;
      }
    }
    f.points = std::move(kept);
    if (f.points.empty()) {
      throw ValidationError("frame " + std::to_string(idx) + " has no points inside the workspace");
    }
    seq.frames.push_back(std::move(f));
  }
  if (dropped > 0) {
    seq.warnings.push_back("dropped " + std::to_string(dropped) + " points outside workspace bounds");
  }
  return seq;
}

void save_sequence(const SceneManifest& manifest, const std::vector<SemanticFrame>& frames,
                   const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "frames");
  save_manifest(manifest, dir / "manifest.json");
  for (const auto& f : frames) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06d.csv", f.frame_index);
    std::ofstream out(dir / "frames" / name);
    if (!out) throw FormatError("cannot write frame file " + std::string(name));
    out << "x,y,z,instance_id,confidence\n";
    out.precision(17);
    for (const auto& p : f.points) {
      out << p.position.x() << ',' << p.position.y() << ',' << p.position.z() << ','
          << p.instance_id << ',' << p.confidence << '\n';
    }
  }
}

namespace {

struct CellKey {
  std::int64_t x, y, z;
  int instance;
  bool operator==(const CellKey&) const = default;
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const {
    std::size_t h = std::hash<std::int64_t>()(k.x);
    h = h * 1099511628211ULL ^ std::hash<std::int64_t>()(k.y);
    h = h * 1099511628211ULL ^ std::hash<std::int64_t>()(k.z);
    h = h * 1099511628211ULL ^ std::hash<int>()(k.instance);
    return h;
  }
};

}  // namespace

SemanticFrame downsample(const SemanticFrame& frame, double voxel_size) {
  if (!(voxel_size > 0.0)) throw ArgumentError("voxel_size must be positive");
  struct Acc {
    Vec3 sum = Vec3::Zero();
    double conf = 0.0;
    std::size_t n = 0;
    std::size_t first = 0;  // keeps output order stable
  };
  std::unordered_map<CellKey, Acc, CellKeyHash> cells;
  cells.reserve(frame.points.size());
  for (std::size_t i = 0; i < frame.points.size(); ++i) {
    const auto& p = frame.points[i];
    CellKey key{static_cast<std::int64_t>(std::floor(p.position.x() / voxel_size)),
                static_cast<std::int64_t>(std::floor(p.position.y() / voxel_size)),
                static_cast<std::int64_t>(std::floor(p.position.z() / voxel_size)),
                p.instance_id};
    auto [it, inserted] = cells.try_emplace(key);
    if (inserted) it->second.first = i;
    it->second.sum += p.position;
    it->second.conf += p.confidence;
    it->second.n += 1;
  }
  std::vector<std::pair<std::size_t, PointRecord>> pooled;
  pooled.reserve(cells.size());
  for (const auto& [key, acc] : cells) {
    PointRecord pr;
    pr.position = acc.sum / static_cast<double>(acc.n);
    pr.instance_id = key.instance;
    pr.confidence = acc.conf / static_cast<double>(acc.n);
    pooled.emplace_back(acc.first, pr);
  }
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  SemanticFrame out;
  out.frame_index = frame.frame_index;
  out.timestamp = frame.timestamp;
  out.points.reserve(pooled.size());
  for (auto& [_, pr] : pooled) out.points.push_back(pr);
  return out;
}

std::vector<Vec3> downsample(const std::vector<Vec3>& points, double voxel_size) {
  SemanticFrame f;
  f.points.reserve(points.size());
  for (const auto& p : points) f.points.push_back({p, 0, 1.0});
  SemanticFrame d = downsample(f, voxel_size);
  std::vector<Vec3> out;
  out.reserve(d.points.size());
  for (const auto& p : d.points) out.push_back(p.position);
  return out;
}

}  // namespace psag
