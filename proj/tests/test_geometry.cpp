#include <doctest.h>

#include <random>

#include <psag/geometry.hpp>

#include "oracles.hpp"

using namespace psag;

// ---------------------------------------------------------------------- OBB

TEST_CASE("fit_obb on an axis-aligned unit cube") {
  std::vector<Vec3> pts;
  for (int i = 0; i < 8; ++i) {
    pts.push_back(Vec3(i & 1 ? 0.5 : -0.5, i & 2 ? 0.5 : -0.5, i & 4 ? 0.5 : -0.5));
  }
  const OrientedBox box = fit_obb(pts);
  CHECK((box.half_extents - Vec3(0.5, 0.5, 0.5)).norm() < 1e-6);
  CHECK(box.pose.translation.norm() < 1e-9);
  // Axes must map onto the coordinate axes up to permutation and sign.
  const Mat3 rot = box.pose.rotation.toRotationMatrix();
  for (int c = 0; c < 3; ++c) {
    const Vec3 axis = rot.col(c);
    CHECK(axis.cwiseAbs().maxCoeff() == doctest::Approx(1.0).epsilon(1e-5));
  }
  for (const auto& p : pts) CHECK(box.contains(p));
}

TEST_CASE("fit_obb recovers an in-plane rotation of a planar rectangle") {
  std::vector<Vec3> pts;
  const double angle = 30.0 * M_PI / 180.0;
  const Eigen::AngleAxisd rot(angle, Vec3::UnitZ());
  for (int i = 0; i <= 40; ++i) {
    for (int j = 0; j <= 20; ++j) {
      pts.push_back(rot * Vec3(-1.0 + 0.05 * i, -0.5 + 0.05 * j, 0.0));
    }
  }
  const OrientedBox box = fit_obb(pts);
  CHECK(box.degenerate);
  CHECK(box.half_extents.x() == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(box.half_extents.y() == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(box.half_extents.z() == doctest::Approx(kMinHalfExtent));

  // Recovered in-plane angle vs the 0.1-degree sweep oracle.
  const double oracle_angle = oracles::sweep_min_rect_angle(pts);
  const Vec3 axis0 = box.pose.rotation * Vec3::UnitX();
  double recovered = std::atan2(std::abs(axis0.y()), std::abs(axis0.x())) * 180.0 / M_PI;
  const double diff = std::min(std::abs(recovered - oracle_angle),
                               std::abs(90.0 - recovered - oracle_angle));
  CHECK(diff < 0.5);
}

TEST_CASE("fit_obb volume stays within 1 percent of the 2-degree grid oracle") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 3; ++trial) {
    const Vec3 scale(1.0, 0.3 + 0.2 * trial, 0.15 + 0.1 * trial);
    auto pts = oracles::random_cloud(rng, 500, scale, trial % 2 == 1);
    pts = oracles::transformed(pts, oracles::random_pose(rng, M_PI, 0.5));
    const double mine = fit_obb(pts).volume();
    const double oracle = oracles::grid_min_obb_volume(pts);
    CHECK(mine <= 1.01 * oracle);
  }
}

TEST_CASE("fit_obb containment holds on randomized clouds") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    auto pts = oracles::random_cloud(rng, 200, Vec3(0.5, 0.2, 0.1));
    pts = oracles::transformed(pts, oracles::random_pose(rng, M_PI, 1.0));
    const OrientedBox box = fit_obb(pts);
    for (const auto& p : pts) CHECK(box.contains(p));
    // Canonical order: extents descending.
    CHECK(box.half_extents.x() >= box.half_extents.y());
    CHECK(box.half_extents.y() >= box.half_extents.z());
  }
}

TEST_CASE("fit_obb degenerate inputs") {
  CHECK_THROWS_AS(fit_obb({}), ArgumentError);
  std::vector<Vec3> line;
  for (int i = 0; i < 10; ++i) line.push_back(Vec3(0.1 * i, 0.0, 0.0));
  const OrientedBox box = fit_obb(line);
  CHECK(box.degenerate);
  CHECK(box.half_extents.y() == doctest::Approx(kMinHalfExtent));
  CHECK(box.half_extents.z() == doctest::Approx(kMinHalfExtent));
  for (const auto& p : line) CHECK(box.contains(p));
}

// ---------------------------------------------------------------------- ICP

TEST_CASE("icp_refine fixed point on identical clouds") {
  std::mt19937_64 rng(31);
  const auto cloud = oracles::random_cloud(rng, 300, Vec3(0.3, 0.3, 0.1));
  const IcpResult r = icp_refine(cloud, cloud, Pose::identity());
  CHECK(r.rmse < 1e-12);
  CHECK(r.fitness == doctest::Approx(1.0));
  CHECK(r.pose.translation.norm() < 1e-9);
  CHECK(rotation_angle(r.pose.rotation) < 1e-9);
}

TEST_CASE("icp_refine recovers a known transform from identity init") {
  std::mt19937_64 rng(32);
  const auto source = oracles::random_cloud(rng, 400, Vec3(0.4, 0.4, 0.15));
  Pose gt;
  gt.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(10.0 * M_PI / 180.0, Vec3::UnitZ()));
  gt.translation = Vec3(0.1, 0.0, 0.0);
  const auto target = oracles::transformed(source, gt);

  IcpParams params;
  params.max_corr_dist = 0.5;
  params.max_iters = 60;
  params.tol = 1e-14;
  const IcpResult r = icp_refine(source, target, Pose::identity(), params);
  CHECK(r.rmse < 1e-6);
  CHECK((r.pose.translation - gt.translation).norm() < 1e-6);
  CHECK(rotation_angle(r.pose.rotation, gt.rotation) < 1e-6);
}

TEST_CASE("icp_refine low-overlap error on disjoint clouds") {
  std::mt19937_64 rng(33);
  const auto a = oracles::random_cloud(rng, 100, Vec3(0.1, 0.1, 0.1));
  auto b = a;
  for (auto& p : b) p.x() += 1.0;
  IcpParams params;
  params.max_corr_dist = 0.05;
  CHECK_THROWS_AS(icp_refine(a, b, Pose::identity(), params), LowOverlapError);
}

TEST_CASE("icp_refine per-iteration rmse is non-increasing") {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 5; ++trial) {
    const auto source = oracles::random_cloud(rng, 300, Vec3(0.3, 0.2, 0.1));
    const Pose gt = oracles::random_pose(rng, 0.3, 0.05);
    const auto target = oracles::transformed(source, gt);
    IcpParams params;
    params.max_corr_dist = 1.0;  // full overlap keeps the inlier set stable
    params.max_iters = 40;
    params.tol = 1e-14;
    const IcpResult r = icp_refine(source, target, Pose::identity(), params);
    for (std::size_t i = 1; i < r.rmse_trace.size(); ++i) {
      CHECK(r.rmse_trace[i] <= r.rmse_trace[i - 1] + 1e-12);
    }
  }
}

TEST_CASE("icp_refine rejects empty clouds and bad tolerances") {
  const std::vector<Vec3> one = {Vec3::Zero()};
  CHECK_THROWS_AS(icp_refine({}, one, Pose::identity()), ArgumentError);
  CHECK_THROWS_AS(icp_refine(one, {}, Pose::identity()), ArgumentError);
  IcpParams params;
  params.tol = 0.0;
  CHECK_THROWS_AS(icp_refine(one, one, Pose::identity(), params), ArgumentError);
}

// ------------------------------------------------------------------- Chamfer

TEST_CASE("chamfer_closest on unit cubes half a meter apart") {
  Pose left, right;
  right.translation = Vec3(1.5, 0.0, 0.0);  // faces at 0.5 and 1.0
  const auto a = oracles::box_cloud(Vec3(0.5, 0.5, 0.5), left, 0.1);
  const auto b = oracles::box_cloud(Vec3(0.5, 0.5, 0.5), right, 0.1);
  const ChamferResult r = chamfer_closest(a, b);
  CHECK(r.min_distance == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("chamfer_closest identical single points") {
  const ChamferResult r = chamfer_closest({Vec3(0.1, 0.2, 0.3)}, {Vec3(0.1, 0.2, 0.3)});
  CHECK(r.min_distance == 0.0);
  REQUIRE(r.closest_pairs.size() == 1);
}

TEST_CASE("chamfer_closest equals the brute-force double loop exactly") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 5; ++trial) {
    const auto a = oracles::random_cloud(rng, 1000, Vec3(0.5, 0.5, 0.5));
    auto b = oracles::random_cloud(rng, 1000, Vec3(0.5, 0.5, 0.5));
    const double gap = trial * 0.3;
    for (auto& p : b) p.x() += gap;
    const double band = 0.005;
    const ChamferResult r = chamfer_closest(a, b, band);
    CHECK(r.min_distance == oracles::brute_min_distance(a, b));

    const auto expected = oracles::brute_pairs_within(a, b, r.min_distance + band);
    REQUIRE(r.closest_pairs.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
      CHECK(r.closest_pairs[i].index_a == std::get<0>(expected[i]));
      CHECK(r.closest_pairs[i].index_b == std::get<1>(expected[i]));
      CHECK(r.closest_pairs[i].distance == std::get<2>(expected[i]));
    }
  }
}

TEST_CASE("chamfer_closest min distance is symmetric") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 10; ++trial) {
    const auto a = oracles::random_cloud(rng, 300, Vec3(0.4, 0.4, 0.4));
    auto b = oracles::random_cloud(rng, 200, Vec3(0.4, 0.4, 0.4));
    for (auto& p : b) p.y() += 0.2 * trial;
    CHECK(chamfer_closest(a, b).min_distance == chamfer_closest(b, a).min_distance);
  }
}

// ------------------------------------------------------------ contact region

TEST_CASE("smooth_contact delta limit puts all mass in one voxel") {
  const double h = 0.005;
  const std::vector<Vec3> mids = {Vec3(0.5 * h + 3 * h, 0.5 * h, 0.5 * h)};
  const ContactRegion r = smooth_contact_midpoints(mids, h, h / 100.0);
  double max_w = 0.0;
  for (double w : r.weights) max_w = std::max(max_w, w);
  CHECK(max_w == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.sum() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("smooth_contact matches the sampled truncated kernel for one midpoint") {
  const double h = 0.005, sigma = 0.005;
  // Midpoint exactly on a voxel center so the trilinear splat is a delta.
  const Vec3 mid(10.5 * h, -3.5 * h, 0.5 * h);
  const ContactRegion r = smooth_contact_midpoints({mid}, h, sigma);
  const auto field = oracles::direct_gaussian_field({mid}, h, sigma);

  for (const auto& [cell, w] : field) {
    const int i = cell[0] - static_cast<int>(std::llround(r.grid_origin.x() / h));
    const int j = cell[1] - static_cast<int>(std::llround(r.grid_origin.y() / h));
    const int k = cell[2] - static_cast<int>(std::llround(r.grid_origin.z() / h));
    double actual = 0.0;
    if (i >= 0 && j >= 0 && k >= 0 && i < r.dims.x() && j < r.dims.y() && k < r.dims.z()) {
      actual = r.at(i, j, k);
    }
    // The library drops numerically irrelevant tail cells (< 1e-7).
    CHECK(std::abs(actual - w) < 3e-7);
  }
  CHECK(r.sum() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("smooth_contact symmetric midpoints give a symmetric field") {
  const double h = 0.005, sigma = 0.01;
  const std::vector<Vec3> mids = {Vec3(-2.5 * h, 0.5 * h, 0.5 * h), Vec3(3.5 * h, 0.5 * h, 0.5 * h)};
  const ContactRegion r = smooth_contact_midpoints(mids, h, sigma);
  // Mirror about the midpoint plane between the two splats: x -> h - x.
  for (int k = 0; k < r.dims.z(); ++k) {
    for (int j = 0; j < r.dims.y(); ++j) {
      for (int i = 0; i < r.dims.x(); ++i) {
        const Vec3 c = r.voxel_center(i, j, k);
        const Vec3 mirrored(h - c.x(), c.y(), c.z());
        const int mi = static_cast<int>(std::floor((mirrored.x() - r.grid_origin.x()) / h));
        if (mi < 0 || mi >= r.dims.x()) continue;
        CHECK(r.at(i, j, k) == doctest::Approx(r.at(mi, j, k)).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("smooth_contact argument errors") {
  CHECK_THROWS_AS(smooth_contact_midpoints({}, 0.005, 0.01), ArgumentError);
  CHECK_THROWS_AS(smooth_contact_midpoints({Vec3::Zero()}, 0.0, 0.01), ArgumentError);
  CHECK_THROWS_AS(smooth_contact_midpoints({Vec3::Zero()}, 0.005, 0.0), ArgumentError);
}

TEST_CASE("contact region weights always sum to one") {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Vec3> mids;
    for (int i = 0; i < 50; ++i) mids.push_back(Vec3(u(rng), u(rng), u(rng)));
    const ContactRegion r = smooth_contact_midpoints(mids, 0.005, 0.01);
    CHECK(std::abs(r.sum() - 1.0) < 1e-9);
    double max_w = 0.0;
    for (double w : r.weights) max_w = std::max(max_w, w);
    CHECK(max_w > 0.0);
  }
}

// --------------------------------------------------------------------- NUNOCS

TEST_CASE("fit_nunocs on a unit cube centered at the origin") {
  std::vector<Vec3> pts;
  for (int i = 0; i < 8; ++i) {
    pts.push_back(Vec3(i & 1 ? 0.5 : -0.5, i & 2 ? 0.5 : -0.5, i & 4 ? 0.5 : -0.5));
  }
  const NunocsMap map = fit_nunocs(pts);
  CHECK(map.origin.norm() < 1e-9);
  CHECK((map.per_axis_scale - Vec3::Ones()).norm() < 1e-6);
}

TEST_CASE("fit_nunocs per-axis scales for a 2x1x1 box") {
  std::vector<Vec3> pts;
  for (int i = 0; i < 8; ++i) {
    pts.push_back(Vec3(i & 1 ? 1.0 : -1.0, i & 2 ? 0.5 : -0.5, i & 4 ? 0.5 : -0.5));
  }
  const NunocsMap map = fit_nunocs(pts);
  CHECK((map.per_axis_scale - Vec3(0.5, 1.0, 1.0)).norm() < 1e-6);
}

TEST_CASE("nunocs apply/invert round trip on points and poses") {
  std::mt19937_64 rng(61);
  auto pts = oracles::random_cloud(rng, 300, Vec3(0.6, 0.3, 0.2));
  pts = oracles::transformed(pts, oracles::random_pose(rng, M_PI, 0.5));
  const NunocsMap map = fit_nunocs(pts);
  for (const auto& p : pts) {
    CHECK((map.invert(map.apply(p)) - p).norm() < 1e-9);
  }
  for (int trial = 0; trial < 10; ++trial) {
    const Pose pose = oracles::random_pose(rng, M_PI, 0.5);
    const Pose rt = map.invert(map.apply(pose));
    CHECK((rt.translation - pose.translation).norm() < 1e-9);
    CHECK(rotation_angle(rt.rotation, pose.rotation) < 1e-9);
  }
}

TEST_CASE("connected_components splits well-separated clusters") {
  std::vector<Vec3> pts;
  for (int i = 0; i < 50; ++i) pts.push_back(Vec3(0.001 * i, 0.0, 0.0));
  for (int i = 0; i < 30; ++i) pts.push_back(Vec3(1.0 + 0.001 * i, 0.0, 0.0));
  const auto comps = connected_components(pts, 0.01);
  REQUIRE(comps.size() == 2);
  CHECK(comps[0].size() + comps[1].size() == pts.size());
}
