#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include <psag/ingest.hpp>

#include "oracles.hpp"

using namespace psag;
namespace fs = std::filesystem;

namespace {

SceneManifest toy_manifest() {
  SceneManifest m;
  m.objects.push_back({0, "hand", "hand", true, false, ""});
  m.objects.push_back({1, "knife", "knife", false, false, ""});
  m.objects.push_back({2, "dough", "dough", false, true, "dough"});
  m.frame_rate = 30.0;
  m.workspace_bounds.min = Vec3(-1, -1, -1);
  m.workspace_bounds.max = Vec3(1, 1, 1);
  return m;
}

std::vector<SemanticFrame> toy_frames(int count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<SemanticFrame> frames;
  for (int f = 0; f < count; ++f) {
    SemanticFrame frame;
    frame.frame_index = f;
    frame.timestamp = f / 30.0;
    for (int id : {0, 1, 2}) {
      for (int i = 0; i < 20; ++i) {
        frame.points.push_back({Vec3(u(rng), u(rng), u(rng)), id, 0.5 + 0.5 * (i % 2)});
      }
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("psag_ingest_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("load_sequence round-trips save_sequence") {
  std::mt19937_64 rng(11);
  TempDir dir;
  const auto manifest = toy_manifest();
  const auto frames = toy_frames(3, rng);
  save_sequence(manifest, frames, dir.path);

  const Sequence loaded = load_sequence(dir.path);
  REQUIRE(loaded.frames.size() == frames.size());
  CHECK(loaded.manifest.objects.size() == manifest.objects.size());
  CHECK(loaded.manifest.frame_rate == manifest.frame_rate);
  for (std::size_t f = 0; f < frames.size(); ++f) {
    REQUIRE(loaded.frames[f].points.size() == frames[f].points.size());
    CHECK(loaded.frames[f].frame_index == frames[f].frame_index);
    CHECK(loaded.frames[f].timestamp == doctest::Approx(frames[f].timestamp));
    for (std::size_t i = 0; i < frames[f].points.size(); ++i) {
      // CSV written at full precision: exact round trip.
      CHECK(loaded.frames[f].points[i].position == frames[f].points[i].position);
      CHECK(loaded.frames[f].points[i].instance_id == frames[f].points[i].instance_id);
      CHECK(loaded.frames[f].points[i].confidence == frames[f].points[i].confidence);
    }
  }
}

TEST_CASE("load_sequence validation errors") {
  std::mt19937_64 rng(12);
  TempDir dir;
  const auto manifest = toy_manifest();

  SUBCASE("missing manifest is a format error") {
    fs::create_directories(dir.path / "frames");
    std::ofstream(dir.path / "frames" / "000000.csv") << "x,y,z,instance_id,confidence\n0,0,0,1,1\n";
    CHECK_THROWS_AS(load_sequence(dir.path), FormatError);
  }

  SUBCASE("unknown instance id names the frame and id") {
    auto frames = toy_frames(3, rng);
    frames[2].points[0].instance_id = 99;
    save_sequence(manifest, frames, dir.path);
    try {
      load_sequence(dir.path);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("frame 2") != std::string::npos);
      CHECK(msg.find("99") != std::string::npos);
    }
  }

  SUBCASE("empty frame file is a validation error") {
    auto frames = toy_frames(2, rng);
    save_sequence(manifest, frames, dir.path);
    std::ofstream(dir.path / "frames" / "000002.csv") << "x,y,z,instance_id,confidence\n";
    CHECK_THROWS_AS(load_sequence(dir.path), ValidationError);
  }

  SUBCASE("two hands rejected in a demonstration manifest") {
    auto bad = manifest;
    bad.objects[1].is_hand = true;
    auto frames = toy_frames(1, rng);
    save_sequence(bad, frames, dir.path);
    CHECK_THROWS_AS(load_sequence(dir.path), ValidationError);
  }
}

TEST_CASE("confidence defaults to 1 when the column is absent") {
  TempDir dir;
  save_manifest(toy_manifest(), dir.path / "manifest.json");
  fs::create_directories(dir.path / "frames");
  std::ofstream(dir.path / "frames" / "000000.csv") << "x,y,z,instance_id\n0.1,0.2,0.3,1\n";
  const Sequence seq = load_sequence(dir.path);
  REQUIRE(seq.frames.size() == 1);
  REQUIRE(seq.frames[0].points.size() == 1);
  CHECK(seq.frames[0].points[0].confidence == 1.0);
}

TEST_CASE("points outside workspace bounds are dropped with a warning") {
  std::mt19937_64 rng(13);
  TempDir dir;
  auto frames = toy_frames(1, rng);
  frames[0].points.push_back({Vec3(5.0, 0.0, 0.0), 1, 1.0});
  save_sequence(toy_manifest(), frames, dir.path);
  const Sequence seq = load_sequence(dir.path);
  CHECK(seq.frames[0].points.size() == frames[0].points.size() - 1);
  REQUIRE(seq.warnings.size() == 1);
  CHECK(seq.warnings[0].find("1 points") != std::string::npos);
}

TEST_CASE("downsample pools per voxel and instance") {
  SUBCASE("eight points of one instance in one voxel collapse to their centroid") {
    SemanticFrame f;
    Vec3 sum = Vec3::Zero();
    for (int i = 0; i < 8; ++i) {
      const Vec3 p(0.001 + 0.004 * (i & 1), 0.001 + 0.004 * ((i >> 1) & 1),
                   0.001 + 0.004 * ((i >> 2) & 1));
      sum += p;
      f.points.push_back({p, 7, 1.0});
    }
    const SemanticFrame d = downsample(f, 0.05);
    REQUIRE(d.points.size() == 1);
    CHECK((d.points[0].position - sum / 8.0).norm() < 1e-15);
    CHECK(d.points[0].instance_id == 7);
  }

  SUBCASE("two instances in the same voxel stay separate") {
    SemanticFrame f;
    f.points.push_back({Vec3(0.01, 0.01, 0.01), 1, 1.0});
    f.points.push_back({Vec3(0.02, 0.02, 0.02), 2, 1.0});
    CHECK(downsample(f, 0.05).points.size() == 2);
  }

  SUBCASE("non-positive voxel size is an argument error") {
    SemanticFrame f;
    f.points.push_back({Vec3::Zero(), 0, 1.0});
    CHECK_THROWS_AS(downsample(f, 0.0), ArgumentError);
    CHECK_THROWS_AS(downsample(f, -0.1), ArgumentError);
  }

  SUBCASE("matches brute-force hash-by-cell pooling on a random cloud") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    SemanticFrame f;
    for (int i = 0; i < 10000; ++i) {
      f.points.push_back({Vec3(u(rng), u(rng), u(rng)), i % 3, 1.0});
    }
    const double voxel = 0.01;
    const SemanticFrame d = downsample(f, voxel);

    // Brute-force oracle: map every point to its cell, average per cell.
    struct Acc {
      Vec3 sum = Vec3::Zero();
      int n = 0;
    };
    std::map<std::tuple<std::int64_t, std::int64_t, std::int64_t, int>, Acc> cells;
    for (const auto& p : f.points) {
      auto& acc = cells[{static_cast<std::int64_t>(std::floor(p.position.x() / voxel)),
                         static_cast<std::int64_t>(std::floor(p.position.y() / voxel)),
                         static_cast<std::int64_t>(std::floor(p.position.z() / voxel)),
                         p.instance_id}];
      acc.sum += p.position;
      acc.n += 1;
    }
    REQUIRE(d.points.size() == cells.size());
    std::size_t matched = 0;
    for (const auto& p : d.points) {
      for (const auto& [key, acc] : cells) {
        if (std::get<3>(key) == p.instance_id && (p.position - acc.sum / acc.n).norm() < 1e-12) {
          ++matched;
          break;
        }
      }
    }
    CHECK(matched == d.points.size());
  }
}

TEST_CASE("downsample is idempotent") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  SemanticFrame f;
  for (int i = 0; i < 5000; ++i) f.points.push_back({Vec3(u(rng), u(rng), u(rng)), i % 2, 1.0});
  const SemanticFrame once = downsample(f, 0.02);
  const SemanticFrame twice = downsample(once, 0.02);
  CHECK(once.points.size() == twice.points.size());
}

TEST_CASE("downsample keeps points inside their source voxel bounds") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  SemanticFrame f;
  for (int i = 0; i < 2000; ++i) f.points.push_back({Vec3(u(rng), u(rng), u(rng)), 0, 1.0});
  const double voxel = 0.03;
  for (const auto& p : downsample(f, voxel).points) {
    // A centroid of cell members can never leave the cell.
    const Vec3 cell(std::floor(p.position.x() / voxel), std::floor(p.position.y() / voxel),
                    std::floor(p.position.z() / voxel));
    CHECK((p.position.array() >= cell.array() * voxel - 1e-12).all());
    CHECK((p.position.array() <= (cell.array() + 1.0) * voxel + 1e-12).all());
  }
}
