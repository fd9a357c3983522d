#include "psag/config.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace psag {

using nlohmann::json;

namespace {

void get_if(const json& j, const char* key, double& out) {
  if (j.contains(key)) out = j.at(key).get<double>();
}
void get_if(const json& j, const char* key, int& out) {
  if (j.contains(key)) out = j.at(key).get<int>();
}
void get_if(const json& j, const char* key, bool& out) {
  if (j.contains(key)) out = j.at(key).get<bool>();
}
void get_if(const json& j, const char* key, std::uint64_t& out) {
  if (j.contains(key)) out = j.at(key).get<std::uint64_t>();
}
void get_if(const json& j, const char* key, std::int64_t& out) {
  if (j.contains(key)) out = j.at(key).get<std::int64_t>();
}

void check_keys(const json& j, std::initializer_list<const char*> known,
                const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) {
      if (key == k) {
        ok = true;
        break;
      }
    }
    if (!ok) throw FormatError("unknown config key '" + key + "' in " + where);
  }
}

void apply_geometry(const json& j, GraphParams& g) {
  check_keys(j,
             {"downsample_voxel", "contact_threshold", "interaction_levels", "contact_band",
              "region_voxel", "region_sigma", "debounce", "icp_max_iters", "icp_tol",
              "icp_max_corr_dist", "icp_min_fitness"},
             "geometry");
  get_if(j, "downsample_voxel", g.interaction.downsample_voxel);
  get_if(j, "contact_threshold", g.interaction.contact_threshold);
  get_if(j, "interaction_levels", g.interaction.levels);
  get_if(j, "contact_band", g.contact_band);
  get_if(j, "region_voxel", g.region_voxel);
  get_if(j, "region_sigma", g.region_sigma);
  get_if(j, "debounce", g.debounce);
  get_if(j, "icp_max_iters", g.icp.max_iters);
  get_if(j, "icp_tol", g.icp.tol);
  get_if(j, "icp_max_corr_dist", g.icp.max_corr_dist);
  get_if(j, "icp_min_fitness", g.icp.min_fitness);
}

void apply_sim(const json& j, sim::SceneParams& s) {
  check_keys(j,
             {"grid_spacing", "particles_per_cell", "jitter", "grid_margin", "dt", "friction",
              "sticky_tools", "grid_damping", "max_particles"},
             "sim");
  get_if(j, "grid_spacing", s.grid_spacing);
  get_if(j, "particles_per_cell", s.particles_per_cell);
  get_if(j, "jitter", s.jitter);
  get_if(j, "grid_margin", s.grid_margin);
  get_if(j, "dt", s.dt);
  get_if(j, "friction", s.friction);
  get_if(j, "sticky_tools", s.sticky_tools);
  get_if(j, "grid_damping", s.grid_damping);
  get_if(j, "max_particles", s.max_particles);
}

void apply_weights(const json& j, opt::CostWeights& w) {
  check_keys(j,
             {"lambda1", "lambda2", "lambda3", "separation_weight", "kl_epsilon", "p_unsplit",
              "d_cap", "w_rot", "w_ang", "terminal_window", "full_horizon_contact"},
             "weights");
  get_if(j, "lambda1", w.lambda1);
  get_if(j, "lambda2", w.lambda2);
  get_if(j, "lambda3", w.lambda3);
  get_if(j, "separation_weight", w.separation_weight);
  get_if(j, "kl_epsilon", w.kl_epsilon);
  get_if(j, "p_unsplit", w.p_unsplit);
  get_if(j, "d_cap", w.d_cap);
  get_if(j, "w_rot", w.w_rot);
  get_if(j, "w_ang", w.w_ang);
  get_if(j, "terminal_window", w.terminal_window);
  get_if(j, "full_horizon_contact", w.full_horizon_contact);
}

void apply_adam(const json& j, opt::AdamConfig& a) {
  check_keys(j,
             {"lr", "beta1", "beta2", "eps", "max_iters", "fd_delta", "scheme", "v_max",
              "omega_max", "twist_mask", "control_steps", "max_knots"},
             "adam");
  get_if(j, "lr", a.lr);
  get_if(j, "beta1", a.beta1);
  get_if(j, "beta2", a.beta2);
  get_if(j, "eps", a.eps);
  get_if(j, "max_iters", a.max_iters);
  get_if(j, "fd_delta", a.fd_delta);
  get_if(j, "v_max", a.v_max);
  get_if(j, "omega_max", a.omega_max);
  get_if(j, "control_steps", a.control_steps);
  get_if(j, "max_knots", a.max_knots);
  if (j.contains("scheme")) {
    const std::string s = j["scheme"].get<std::string>();
    if (s == "central_fd") {
      a.scheme = opt::GradientScheme::CentralFd;
    } else if (s == "forward_fd") {
      a.scheme = opt::GradientScheme::ForwardFd;
    } else {
      throw FormatError("unknown gradient scheme '" + s + "'");
    }
  }
  if (j.contains("twist_mask")) {
    const auto& m = j["twist_mask"];
    if (!m.is_array() || m.size() != 6) throw FormatError("twist_mask must be a 6-array");
    for (int d = 0; d < 6; ++d) a.twist_mask[static_cast<std::size_t>(d)] = m[d].get<bool>();
  }
}

void apply_materials(const json& j, sim::MaterialTable& table) {
  for (const auto& [name, jm] : j.items()) {
    sim::MaterialPreset preset;
    if (auto it = table.find(name); it != table.end()) preset = it->second;
    preset.name = name;
    check_keys(jm, {"density", "youngs_modulus", "poisson_ratio", "yield_stress", "model"},
               "materials." + name);
    get_if(jm, "density", preset.density);
    get_if(jm, "youngs_modulus", preset.youngs_modulus);
    get_if(jm, "poisson_ratio", preset.poisson_ratio);
    get_if(jm, "yield_stress", preset.yield_stress);
    if (jm.contains("model")) {
      const std::string m = jm["model"].get<std::string>();
      if (m == "elastic") {
        preset.model = sim::MaterialModel::Elastic;
      } else if (m == "elastoplastic") {
        preset.model = sim::MaterialModel::Elastoplastic;
      } else if (m == "fluid") {
        preset.model = sim::MaterialModel::Fluid;
      } else {
        throw FormatError("unknown material model '" + m + "'");
      }
    }
    table[name] = preset;
  }
}

}  // namespace

void PipelineConfig::apply_json_text(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError("config parse error in " + origin + ": " + e.what());
  }
  check_keys(j,
             {"seed", "threads", "geometry", "sim", "weights", "adam", "gains", "materials",
              "program_rate_hz", "feasibility_tol", "contact_stride"},
             origin);
  get_if(j, "seed", seed);
  get_if(j, "threads", threads);
  get_if(j, "program_rate_hz", program_rate_hz);
  get_if(j, "feasibility_tol", feasibility.penetration_tol);
  get_if(j, "contact_stride", sequence.contact_stride);
  if (j.contains("geometry")) {
    apply_geometry(j["geometry"], graph);
    sequence.contact_threshold = graph.interaction.contact_threshold;
    sequence.contact_band = graph.contact_band;
    sequence.region_voxel = graph.region_voxel;
    sequence.region_sigma = graph.region_sigma;
  }
  if (j.contains("sim")) apply_sim(j["sim"], sequence.scene);
  if (j.contains("weights")) apply_weights(j["weights"], sequence.weights);
  if (j.contains("adam")) apply_adam(j["adam"], sequence.adam);
  if (j.contains("gains")) {
    check_keys(j["gains"], {"k1", "k2"}, "gains");
    get_if(j["gains"], "k1", gains.k1);
    get_if(j["gains"], "k2", gains.k2);
  }
  if (j.contains("materials")) apply_materials(j["materials"], sequence.scene.materials);
}

void PipelineConfig::apply_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw FormatError("cannot open config file: " + file.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  apply_json_text(text, file.string());
}

void PipelineConfig::finalize() {
  if (threads > 0) set_thread_count(threads);
  sequence.scene.seed = seed;
}

}  // namespace psag
