#include "psag/mpm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include <Eigen/Dense>

namespace psag::sim {

// ------------------------------------------------------------------ materials

MaterialTable builtin_materials() {
  MaterialTable t;
  t["dough"] = {"dough", 1000.0, 5e4, 0.3, 1e3, MaterialModel::Elastoplastic};
  t["avocado-flesh"] = {"avocado-flesh", 1000.0, 1e4, 0.3, 0.0, MaterialModel::Elastic};
  t["water"] = {"water", 1000.0, 5e4, 0.45, 0.0, MaterialModel::Fluid};
  t["pizza"] = {"pizza", 800.0, 2e4, 0.3, 2e3, MaterialModel::Elastoplastic};
  t["elastic"] = {"elastic", 1000.0, 1e4, 0.3, 0.0, MaterialModel::Elastic};
  return t;
}

// --------------------------------------------------------------------- shapes

namespace {

double box_sdf_local(const Vec3& local, const Vec3& he) {
  const Vec3 d = local.cwiseAbs() - he;
  const Vec3 outside = d.cwiseMax(0.0);
  return outside.norm() + std::min(d.maxCoeff(), 0.0);
}

Vec3 box_normal_local(const Vec3& local, const Vec3& he) {
  const Vec3 d = local.cwiseAbs() - he;
  if ((d.array() > 0.0).any()) {
    Vec3 g = Vec3::Zero();
    for (int k = 0; k < 3; ++k) {
      if (d[k] > 0.0) g[k] = local[k] > 0.0 ? d[k] : -d[k];
    }
    const double n = g.norm();
    return n > 0.0 ? Vec3(g / n) : Vec3::UnitZ();
  }
  int k = 0;
  d.maxCoeff(&k);  // closest face
  Vec3 g = Vec3::Zero();
  g[k] = local[k] >= 0.0 ? 1.0 : -1.0;
  return g;
}

double capsule_sdf_local(const Vec3& local, double half_length, double radius) {
  const double z = std::clamp(local.z(), -half_length, half_length);
  return (local - Vec3(0.0, 0.0, z)).norm() - radius;
}

Vec3 capsule_normal_local(const Vec3& local, double half_length) {
  const double z = std::clamp(local.z(), -half_length, half_length);
  const Vec3 offset = local - Vec3(0.0, 0.0, z);
  const double n = offset.norm();
  return n > 1e-12 ? Vec3(offset / n) : Vec3::UnitX();
}

}  // namespace

double shape_sdf(const SdfShape& shape, const Pose& pose, const Vec3& p) {
  const Vec3 local = pose.rotation.conjugate() * (p - pose.translation);
  if (const auto* box = std::get_if<BoxShape>(&shape)) {
    return box_sdf_local(local, box->half_extents);
  }
  const auto& cap = std::get<CapsuleShape>(shape);
  return capsule_sdf_local(local, cap.half_length, cap.radius);
}

Vec3 shape_normal(const SdfShape& shape, const Pose& pose, const Vec3& p) {
  const Vec3 local = pose.rotation.conjugate() * (p - pose.translation);
  Vec3 n_local;
  if (const auto* box = std::get_if<BoxShape>(&shape)) {
    n_local = box_normal_local(local, box->half_extents);
  } else {
    n_local = capsule_normal_local(local, std::get<CapsuleShape>(shape).half_length);
  }
  return pose.rotation * n_local;
}

double shape_bounding_radius(const SdfShape& shape) {
  if (const auto* box = std::get_if<BoxShape>(&shape)) return box->half_extents.norm();
  const auto& cap = std::get<CapsuleShape>(shape);
  return cap.half_length + cap.radius;
}

// ------------------------------------------------------------------- MpmScene

double MpmScene::total_mass() const {
  double m = 0.0;
  for (double v : mass) m += v;
  return m;
}

void MpmScene::add_particle(const Vec3& pos, const Vec3& vel, double m, double vol,
                            std::uint8_t mat, int object) {
  x.push_back(pos);
  v.push_back(vel);
  F.push_back(Mat3::Identity());
  R.push_back(Mat3::Identity());
  C.push_back(Mat3::Zero());
  Jp.push_back(1.0);
  mass.push_back(m);
  volume0.push_back(vol);
  material.push_back(mat);
  object_id.push_back(object);
  if (std::find(object_ids.begin(), object_ids.end(), object) == object_ids.end()) {
    object_ids.push_back(object);
  }
}

int MpmScene::actuator_index(int instance_id) const {
  for (std::size_t i = 0; i < actuators.size(); ++i) {
    if (actuators[i].instance_id == instance_id) return static_cast<int>(i);
  }
  return -1;
}

double MpmScene::object_height(int instance_id, double quantile) const {
  std::vector<double> zs;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (object_id[i] == instance_id) zs.push_back(x[i].z());
  }
  if (zs.empty()) return 0.0;
  std::sort(zs.begin(), zs.end());
  const std::size_t idx = static_cast<std::size_t>(quantile * (zs.size() - 1));
  return zs[idx];
}

std::vector<Vec3> MpmScene::object_particles(int instance_id) const {
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (object_id[i] == instance_id) out.push_back(x[i]);
  }
  return out;
}

// ----------------------------------------------------------------- init_scene

MpmScene init_scene(const Psag& frame, const SceneManifest& manifest,
                    const std::vector<int>& actuator_ids, const SceneParams& params) {
  MpmScene scene;
  scene.dt = params.dt;
  scene.gravity = manifest.gravity;
  scene.grid_damping = params.grid_damping;

  auto is_actuator = [&](int id) {
    return std::find(actuator_ids.begin(), actuator_ids.end(), id) != actuator_ids.end();
  };

  // The grid only needs to cover the particle material (plus headroom for
  // motion); colliders act on grid nodes wherever material reaches them.
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  auto grow_box = [&](const OrientedBox& box) {
    for (int corner = 0; corner < 8; ++corner) {
      const Vec3 local(corner & 1 ? box.half_extents.x() : -box.half_extents.x(),
                       corner & 2 ? box.half_extents.y() : -box.half_extents.y(),
                       corner & 4 ? box.half_extents.z() : -box.half_extents.z());
      const Vec3 p = box.pose.apply(local);
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  };
  for (const auto& node : frame.nodes) {
    if (node.is_deformable) grow_box(node.obb);
  }
  if (!lo.allFinite()) {
    for (const auto& node : frame.nodes) grow_box(node.obb);
  }
  if (!lo.allFinite()) throw ValidationError("init_scene: frame has no nodes");

  const double h = params.grid_spacing;
  scene.grid.spacing = h;
  scene.grid.origin = lo - Vec3::Constant(params.grid_margin);
  const Vec3 extent = hi - lo + 2.0 * Vec3::Constant(params.grid_margin);
  for (int k = 0; k < 3; ++k) {
    scene.grid.dims[k] = static_cast<int>(std::ceil(extent[k] / h - 1e-9)) + 1;
  }
  if (scene.grid.node_count() > (1 << 27)) {
    throw ResourceError("grid of " + std::to_string(scene.grid.node_count()) +
                        " nodes exceeds the resource budget");
  }

  // Particle fill over deformable OBB volumes, 2x2x2 per cell by default.
  const double fill = h / std::cbrt(static_cast<double>(params.particles_per_cell));
  std::int64_t projected = 0;
  for (const auto& node : frame.nodes) {
    if (!node.is_deformable) continue;
    std::int64_t n = 1;
    for (int k = 0; k < 3; ++k) {
      n *= std::max<std::int64_t>(1, std::llround(2.0 * node.obb.half_extents[k] / fill));
    }
    projected += n;
  }
  if (projected > params.max_particles) {
    throw ResourceError("resolution would create " + std::to_string(projected) +
                        " particles, budget is " + std::to_string(params.max_particles));
  }

  std::uint8_t next_material = 0;
  std::map<std::string, std::uint8_t> material_index;
  for (const auto& node : frame.nodes) {
    const ObjectInfo& info = manifest.at(node.instance_id);
    if (node.is_deformable) {
      auto it = params.materials.find(info.material_preset);
      if (it == params.materials.end()) {
        throw ValidationError("unknown material preset '" + info.material_preset + "' for object " +
                              info.name);
      }
      std::uint8_t mat;
      if (auto mit = material_index.find(info.material_preset); mit != material_index.end()) {
        mat = mit->second;
      } else {
        mat = next_material++;
        material_index[info.material_preset] = mat;
        scene.materials.push_back(it->second);
      }

      std::mt19937_64 rng(params.seed ^ (0x9e3779b97f4a7c15ULL * (node.instance_id + 1)));
      std::uniform_real_distribution<double> jit(-0.5, 0.5);
      Eigen::Vector3i n;
      Vec3 spacing;
      for (int k = 0; k < 3; ++k) {
        n[k] = static_cast<int>(
            std::max<std::int64_t>(1, std::llround(2.0 * node.obb.half_extents[k] / fill)));
        spacing[k] = 2.0 * node.obb.half_extents[k] / n[k];
      }
      const double vol = spacing.prod();
      const double m = it->second.density * vol;
      for (int i = 0; i < n.x(); ++i) {
        for (int j = 0; j < n.y(); ++j) {
          for (int k = 0; k < n.z(); ++k) {
            Vec3 local = -node.obb.half_extents +
                         Vec3((i + 0.5) * spacing.x(), (j + 0.5) * spacing.y(),
                              (k + 0.5) * spacing.z());
            local += params.jitter *
                     Vec3(jit(rng) * spacing.x(), jit(rng) * spacing.y(), jit(rng) * spacing.z());
            scene.add_particle(node.obb.pose.apply(local), Vec3::Zero(), m, vol, mat,
                               node.instance_id);
          }
        }
      }
    } else {
      RigidActuator body;
      body.instance_id = node.instance_id;
      body.shape = BoxShape{node.obb.half_extents};
      body.pose = node.obb.pose;
      body.friction = params.friction;
      if (is_actuator(node.instance_id)) {
        body.sticky = params.sticky_tools;
        scene.actuators.push_back(std::move(body));
      } else {
        scene.obstacles.push_back(std::move(body));
      }
    }
  }
  return scene;
}

// --------------------------------------------------------------- 3x3 SVD core

namespace {

// SVD via the eigendecomposition of F^T F (SelfAdjointEigenSolver's direct
// path). Adequate for well-conditioned deformation gradients and an order of
// magnitude faster than JacobiSVD. Handles inversion by pushing the sign
// into the smallest singular value so U and V stay proper rotations.
void svd3(const Mat3& f, Mat3& u, Vec3& sigma, Mat3& v) {
  Eigen::SelfAdjointEigenSolver<Mat3> es;
  es.computeDirect(f.transpose() * f);
  Vec3 ev = es.eigenvalues().cwiseMax(0.0);  // ascending
  v = es.eigenvectors();
  if (v.determinant() < 0.0) v.col(0) = -v.col(0);
  sigma = ev.cwiseSqrt();

  const double scale = std::max(sigma.maxCoeff(), 1e-30);
  for (int k = 0; k < 3; ++k) {
    if (sigma[k] > 1e-9 * scale) {
      u.col(k) = f * v.col(k) / sigma[k];
    } else {
      u.col(k) = Vec3::Zero();  // fixed below
    }
  }
  // Rebuild near-null columns from the others.
  for (int k = 0; k < 3; ++k) {
    if (u.col(k).squaredNorm() < 0.5) {
      u.col(k) = u.col((k + 1) % 3).cross(u.col((k + 2) % 3));
      const double n = u.col(k).norm();
      u.col(k) = n > 1e-12 ? Vec3(u.col(k) / n) : Vec3::Unit(k);
    }
  }
  if (u.determinant() < 0.0) {
    int k = 0;
    sigma.minCoeff(&k);
    u.col(k) = -u.col(k);
    sigma[k] = -sigma[k];
  }
}

struct GridNode {
  Vec3 momentum = Vec3::Zero();
  double mass = 0.0;
};

// Per-thread scratch grid; concurrent rollouts each see their own buffer.
std::vector<GridNode>& grid_scratch(std::size_t nodes) {
  thread_local std::vector<GridNode> scratch;
  scratch.assign(nodes, GridNode{});
  return scratch;
}

}  // namespace

// ----------------------------------------------------------------------- step

StepObservation step(MpmScene& scene, const std::vector<Twist>& action, int step_index) {
  const double h = scene.grid.spacing;
  const double dt = scene.dt;
  const double inv_h = 1.0 / h;
  const auto dims = scene.grid.dims;
  const std::string at_step = " at step " + std::to_string(step_index);

  if (action.size() != scene.actuators.size()) {
    throw ArgumentError("action count " + std::to_string(action.size()) + " != actuator count " +
                        std::to_string(scene.actuators.size()));
  }
  for (std::size_t a = 0; a < action.size(); ++a) {
    const double speed = action[a].linear.norm() +
                         action[a].angular.norm() * shape_bounding_radius(scene.actuators[a].shape);
    if (speed * dt >= h) {
      throw ArgumentError("actuator " + std::to_string(scene.actuators[a].instance_id) +
                          " violates the CFL bound: speed " + std::to_string(speed) + " m/s" +
                          at_step);
    }
  }
  for (std::size_t a = 0; a < action.size(); ++a) scene.actuators[a].twist = action[a];

  std::vector<GridNode>& grid = grid_scratch(static_cast<std::size_t>(scene.grid.node_count()));
  auto node_at = [&](int i, int j, int k) -> GridNode& {
    return grid[(static_cast<std::size_t>(k) * dims.y() + j) * dims.x() + i];
  };

  const std::size_t np = scene.particle_count();

  // ---- particle to grid
  for (std::size_t p = 0; p < np; ++p) {
    const Vec3 u = (scene.x[p] - scene.grid.origin) * inv_h;
    const Eigen::Vector3i base((int)std::floor(u.x() - 0.5), (int)std::floor(u.y() - 0.5),
                               (int)std::floor(u.z() - 0.5));
    if (base.x() < 0 || base.y() < 0 || base.z() < 0 || base.x() + 2 >= dims.x() ||
        base.y() + 2 >= dims.y() || base.z() + 2 >= dims.z()) {
      throw NumericalError("particle left the grid" + at_step);
    }
    const Vec3 fx = u - base.cast<double>();
    // Quadratic B-spline weights over the 3^3 stencil.
    const Vec3 w[3] = {0.5 * (Vec3::Constant(1.5) - fx).array().square(),
                       0.75 - (fx - Vec3::Ones()).array().square(),
                       0.5 * (fx - Vec3::Constant(0.5)).array().square()};

    const MaterialPreset& mat = scene.materials[scene.material[p]];
    Mat3 pf_t;  // P(F) F^T
    if (mat.model == MaterialModel::Fluid) {
      const double j = scene.Jp[p];
      pf_t = mat.lambda() * (j - 1.0) * j * Mat3::Identity();
    } else {
      // scene.R holds the polar rotation of F, maintained by the previous
      // grid-to-particle pass.
      const double j = scene.F[p].determinant();
      pf_t = 2.0 * mat.mu() * (scene.F[p] - scene.R[p]) * scene.F[p].transpose() +
             mat.lambda() * (j - 1.0) * j * Mat3::Identity();
    }
    const Mat3 affine =
        scene.mass[p] * scene.C[p] - (dt * 4.0 * inv_h * inv_h * scene.volume0[p]) * pf_t;
    const Vec3 mv = scene.mass[p] * scene.v[p];

    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        for (int k = 0; k < 3; ++k) {
          const double weight = w[i].x() * w[j].y() * w[k].z();
          const Vec3 dpos = (Vec3(base.x() + i, base.y() + j, base.z() + k) - u) * h;
          GridNode& node = node_at(base.x() + i, base.y() + j, base.z() + k);
          node.momentum += weight * (mv + affine * dpos);
          node.mass += weight * scene.mass[p];
        }
      }
    }
  }

  // ---- grid update: momentum to velocity, gravity, collisions
  StepObservation obs;
  obs.actuator_wrench.resize(scene.actuators.size());
  for (std::size_t a = 0; a < scene.actuators.size(); ++a) {
    obs.actuator_wrench[a].applied_by = scene.actuators[a].instance_id;
  }

  auto collide = [&](const RigidActuator& body, const Vec3& pos, Vec3& vel) -> Vec3 {
    if (shape_sdf(body.shape, body.pose, pos) > 0.0) return Vec3::Zero();
    const Vec3 body_vel =
        body.twist.linear + body.twist.angular.cross(pos - body.pose.translation);
    Vec3 rel = vel - body_vel;
    const Vec3 n = shape_normal(body.shape, body.pose, pos);
    const double vn = rel.dot(n);
    if (vn >= 0.0 && !body.sticky) return Vec3::Zero();
    const Vec3 before = vel;
    if (body.sticky) {
      rel = Vec3::Zero();
    } else {
      Vec3 tangential = rel - vn * n;
      const double tn = tangential.norm();
      if (tn > 1e-12) {
        tangential *= std::max(0.0, 1.0 - body.friction * (-vn) / tn);
      }
      rel = tangential;
    }
    vel = body_vel + rel;
    return vel - before;  // velocity change imposed by the boundary
  };

  const double damping = scene.grid_damping;
  for (int k = 0; k < dims.z(); ++k) {
    for (int j = 0; j < dims.y(); ++j) {
      for (int i = 0; i < dims.x(); ++i) {
        GridNode& node = node_at(i, j, k);
        if (node.mass <= 0.0) continue;
        Vec3 vel = node.momentum / node.mass;
        vel += dt * scene.gravity;
        if (damping > 0.0) vel *= 1.0 - damping;

        const Vec3 pos = scene.grid.node_pos(i, j, k);
        for (const auto& obstacle : scene.obstacles) collide(obstacle, pos, vel);
        for (std::size_t a = 0; a < scene.actuators.size(); ++a) {
          const Vec3 dv = collide(scene.actuators[a], pos, vel);
          if (dv != Vec3::Zero()) {
            const Vec3 impulse = node.mass * dv;
            obs.actuator_wrench[a].force -= impulse / dt;
            obs.actuator_wrench[a].torque -=
                (pos - scene.actuators[a].pose.translation).cross(impulse) / dt;
          }
        }
        // Separate condition on the grid faces (outer two layers).
        for (int ax = 0; ax < 3; ++ax) {
          const int idx = ax == 0 ? i : (ax == 1 ? j : k);
          if (idx < 2) vel[ax] = std::max(vel[ax], 0.0);
          if (idx > dims[ax] - 3) vel[ax] = std::min(vel[ax], 0.0);
        }
        node.momentum = vel;  // stores velocity from here on
      }
    }
  }

  // ---- grid to particle
  double max_speed_sq = 0.0;
  bool finite = true;
  for (std::size_t p = 0; p < np; ++p) {
    const Vec3 u = (scene.x[p] - scene.grid.origin) * inv_h;
    const Eigen::Vector3i base((int)std::floor(u.x() - 0.5), (int)std::floor(u.y() - 0.5),
                               (int)std::floor(u.z() - 0.5));
    const Vec3 fx = u - base.cast<double>();
    const Vec3 w[3] = {0.5 * (Vec3::Constant(1.5) - fx).array().square(),
                       0.75 - (fx - Vec3::Ones()).array().square(),
                       0.5 * (fx - Vec3::Constant(0.5)).array().square()};

    Vec3 vel = Vec3::Zero();
    Mat3 b = Mat3::Zero();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        for (int k = 0; k < 3; ++k) {
          const double weight = w[i].x() * w[j].y() * w[k].z();
          const Vec3 dpos = (Vec3(base.x() + i, base.y() + j, base.z() + k) - u) * h;
          const Vec3 gv = node_at(base.x() + i, base.y() + j, base.z() + k).momentum;
          vel += weight * gv;
          b += weight * gv * dpos.transpose();
        }
      }
    }
    scene.v[p] = vel;
    scene.C[p] = 4.0 * inv_h * inv_h * b;
    scene.x[p] += dt * vel;

    const MaterialPreset& mat = scene.materials[scene.material[p]];
    if (mat.model == MaterialModel::Fluid) {
      scene.Jp[p] = std::clamp(scene.Jp[p] * (1.0 + dt * scene.C[p].trace()), 0.1, 10.0);
      scene.F[p] = std::cbrt(scene.Jp[p]) * Mat3::Identity();
    } else {
      Mat3 f = (Mat3::Identity() + dt * scene.C[p]) * scene.F[p];
      Mat3 u_svd, v_svd;
      Vec3 sigma;
      svd3(f, u_svd, sigma, v_svd);
      if (mat.model == MaterialModel::Elastoplastic) {
        // Von Mises return mapping on Hencky strain.
        Vec3 sig = sigma.cwiseMax(1e-4);
        const Vec3 eps = sig.array().log();
        Vec3 dev = eps - Vec3::Constant(eps.mean());
        const double dev_norm = dev.norm();
        const double stress_norm = 2.0 * mat.mu() * dev_norm;
        if (stress_norm > mat.yield_stress && dev_norm > 1e-12) {
          const double delta_gamma = (stress_norm - mat.yield_stress) / (2.0 * mat.mu());
          const Vec3 proj = (eps - delta_gamma * dev / dev_norm).array().exp();
          f = u_svd * proj.asDiagonal() * v_svd.transpose();
        }
      }
      scene.F[p] = f;
      scene.R[p] = u_svd * v_svd.transpose();
    }

    max_speed_sq = std::max(max_speed_sq, vel.squaredNorm());
    finite = finite && scene.x[p].allFinite() && scene.F[p].allFinite();
  }
  if (!finite) throw NumericalError("NaN in particle state" + at_step);
  if (std::sqrt(max_speed_sq) * dt >= h) {
    throw NumericalError("particle velocity " + std::to_string(std::sqrt(max_speed_sq)) +
                         " m/s violates the CFL bound" + at_step);
  }

  // ---- advance actuators, observations
  for (std::size_t a = 0; a < scene.actuators.size(); ++a) {
    RigidActuator& act = scene.actuators[a];
    act.pose.translation += dt * act.twist.linear;
    act.pose.rotation =
        (rotation_from_angular_velocity(act.twist.angular, dt) * act.pose.rotation).normalized();
    obs.actuator_pose.push_back(act.pose);
  }

  obs.object_centroid.assign(scene.object_ids.size(), Vec3::Zero());
  obs.object_covariance.assign(scene.object_ids.size(), Mat3::Zero());
  std::vector<double> object_mass(scene.object_ids.size(), 0.0);
  std::map<int, std::size_t> object_slot;
  for (std::size_t o = 0; o < scene.object_ids.size(); ++o) object_slot[scene.object_ids[o]] = o;
  for (std::size_t p = 0; p < np; ++p) {
    const std::size_t o = object_slot.at(scene.object_id[p]);
    obs.object_centroid[o] += scene.mass[p] * scene.x[p];
    object_mass[o] += scene.mass[p];
  }
  for (std::size_t o = 0; o < scene.object_ids.size(); ++o) {
    if (object_mass[o] > 0.0) obs.object_centroid[o] /= object_mass[o];
  }
  for (std::size_t p = 0; p < np; ++p) {
    const std::size_t o = object_slot.at(scene.object_id[p]);
    const Vec3 d = scene.x[p] - obs.object_centroid[o];
    obs.object_covariance[o] += (scene.mass[p] / object_mass[o]) * d * d.transpose();
  }

  const double contact_tol = h;
  for (std::size_t a = 0; a < scene.actuators.size(); ++a) {
    std::set<int> touching;
    for (std::size_t p = 0; p < np; ++p) {
      if (touching.count(scene.object_id[p])) continue;
      if (shape_sdf(scene.actuators[a].shape, scene.actuators[a].pose, scene.x[p]) <= contact_tol) {
        touching.insert(scene.object_id[p]);
      }
    }
    for (int id : touching) obs.contacts.emplace_back(scene.actuators[a].instance_id, id);
  }
  return obs;
}

// -------------------------------------------------------------------- rollout

RolloutResult rollout(const MpmScene& scene, const ActionSequence& actions, int horizon,
                      const std::function<void(int, const MpmScene&)>& per_step) {
  if (horizon < 0) throw ArgumentError("rollout horizon must be non-negative");
  if (horizon > actions.horizon()) {
    throw ArgumentError("action sequence of " + std::to_string(actions.horizon()) +
                        " knots is shorter than horizon " + std::to_string(horizon));
  }
  if (!actions.knots.empty() && actions.knots.size() != scene.actuators.size()) {
    throw ArgumentError("action sequence actuator count mismatch");
  }

  RolloutResult result;
  result.final_scene = scene;
  const int steps = horizon * actions.control_steps;
  result.observations.reserve(static_cast<std::size_t>(steps));
  std::vector<Twist> twists(scene.actuators.size());
  for (int s = 0; s < steps; ++s) {
    for (std::size_t a = 0; a < twists.size(); ++a) {
      twists[a] = actions.at(static_cast<int>(a), s);
    }
    StepObservation obs = step(result.final_scene, twists, s);
    obs.time = (s + 1) * result.final_scene.dt;
    result.observations.push_back(std::move(obs));
    if (per_step) per_step(s, result.final_scene);
  }
  return result;
}

// --------------------------------------------------------------- split_bodies

std::vector<std::vector<std::int64_t>> split_bodies(const MpmScene& scene, int object_id) {
  std::vector<Vec3> pts;
  std::vector<std::int64_t> back;
  for (std::size_t p = 0; p < scene.particle_count(); ++p) {
    if (scene.object_id[p] == object_id) {
      pts.push_back(scene.x[p]);
      back.push_back(static_cast<std::int64_t>(p));
    }
  }
  auto comps = connected_components(pts, 2.0 * scene.grid.spacing);
  for (auto& comp : comps) {
    for (auto& idx : comp) idx = back[static_cast<std::size_t>(idx)];
  }
  return comps;
}

// ------------------------------------------------------------------ PLY dump

void write_ply(const MpmScene& scene, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw FormatError("cannot write PLY file: " + file.string());
  const std::size_t count = scene.particle_count() + scene.actuators.size();
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << count << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property int instance_id\nproperty uchar actuator\nend_header\n";
  auto put = [&](const Vec3& p, int id, std::uint8_t actuator) {
    const float xyz[3] = {static_cast<float>(p.x()), static_cast<float>(p.y()),
                          static_cast<float>(p.z())};
    const std::int32_t iid = id;
    out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
    out.write(reinterpret_cast<const char*>(&iid), sizeof(iid));
    out.write(reinterpret_cast<const char*>(&actuator), 1);
  };
  for (std::size_t p = 0; p < scene.particle_count(); ++p) {
    put(scene.x[p], scene.object_id[p], 0);
  }
  for (const auto& act : scene.actuators) put(act.pose.translation, act.instance_id, 1);
}

}  // namespace psag::sim
