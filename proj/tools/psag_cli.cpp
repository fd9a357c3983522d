// psag: demonstration-to-controller pipeline front end.
//
//   psag build-graph <sequence_dir> -o out/      -> out/psag.json
//   psag optimize    out/psag.json -o out/       -> psag_aug.json, rollout.json, report.json
//   psag transfer    out/psag_aug.json <test_dir> -o out/ -> program.json
//   psag dump-scene  out/psag_aug.json out/rollout.json -o out/ply/
//   psag plot        out/report.json -o out/loss.svg
//   psag gen-demo    -o demo/ [--test-dir test/]
//
// Exit codes: 0 ok, 2 validation/format error, 3 numerical failure.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include <psag/pipeline.hpp>
#include <psag/synthetic.hpp>

namespace fs = std::filesystem;

namespace {

struct CommonOpts {
  std::string config_file;
  std::string out_dir = ".";
  // Flag overrides; NaN / INT_MIN mean "not set".
  double seed = -1.0;
  int threads = -1;
  int max_iters = -1;
  double lr = -1.0;
  double lambda1 = -1.0, lambda2 = -1.0, lambda3 = -1.0;
  double grid_spacing = -1.0;
  double dt = -1.0;
  double k1 = -1.0, k2 = std::numeric_limits<double>::quiet_NaN();
  double rate_hz = -1.0;
  int debounce = -1;
  int control_steps = -1;
  int max_knots = -1;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_file, "JSON config file (flags win over file values)");
  cmd->add_option("-o,--out", opts.out_dir, "Output directory");
  cmd->add_option("--seed", opts.seed, "RNG seed (particle jitter)");
  cmd->add_option("--threads", opts.threads, "Worker thread cap");
  cmd->add_option("--max-iters", opts.max_iters, "Adam iterations per subtask");
  cmd->add_option("--lr", opts.lr, "Adam learning rate");
  cmd->add_option("--lambda1", opts.lambda1, "Contact cost weight");
  cmd->add_option("--lambda2", opts.lambda2, "Pose cost weight");
  cmd->add_option("--lambda3", opts.lambda3, "Energy cost weight");
  cmd->add_option("--grid-spacing", opts.grid_spacing, "Simulation grid spacing (m)");
  cmd->add_option("--dt", opts.dt, "Simulation time step (s)");
  cmd->add_option("--k1", opts.k1, "Hybrid controller position gain");
  cmd->add_option("--k2", opts.k2, "Hybrid controller force gain (m/N)");
  cmd->add_option("--rate", opts.rate_hz, "Controller program rate (Hz)");
  cmd->add_option("--debounce", opts.debounce, "Subtask boundary debounce (frames)");
  cmd->add_option("--control-steps", opts.control_steps, "Sim steps per control knot");
  cmd->add_option("--max-knots", opts.max_knots, "Control knots per subtask cap");
}

psag::PipelineConfig make_config(const CommonOpts& opts) {
  psag::PipelineConfig config;
  if (!opts.config_file.empty()) config.apply_file(opts.config_file);
  if (opts.seed >= 0.0) config.seed = static_cast<std::uint64_t>(opts.seed);
  if (opts.threads >= 0) config.threads = opts.threads;
  if (opts.max_iters >= 0) config.sequence.adam.max_iters = opts.max_iters;
  if (opts.lr >= 0.0) config.sequence.adam.lr = opts.lr;
  if (opts.lambda1 >= 0.0) config.sequence.weights.lambda1 = opts.lambda1;
  if (opts.lambda2 >= 0.0) config.sequence.weights.lambda2 = opts.lambda2;
  if (opts.lambda3 >= 0.0) config.sequence.weights.lambda3 = opts.lambda3;
  if (opts.grid_spacing > 0.0) config.sequence.scene.grid_spacing = opts.grid_spacing;
  if (opts.dt > 0.0) config.sequence.scene.dt = opts.dt;
  if (opts.k1 > 0.0) config.gains.k1 = opts.k1;
  if (!std::isnan(opts.k2)) config.gains.k2 = opts.k2;
  if (opts.rate_hz > 0.0) config.program_rate_hz = opts.rate_hz;
  if (opts.debounce >= 0) config.graph.debounce = opts.debounce;
  if (opts.control_steps > 0) config.sequence.adam.control_steps = opts.control_steps;
  if (opts.max_knots > 0) config.sequence.adam.max_knots = opts.max_knots;
  config.finalize();
  return config;
}

void print_warnings(const psag::Warnings& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PSAG pipeline: demonstration -> graph -> simulation -> controller program"};
  app.require_subcommand(1);

  // build-graph
  auto* build = app.add_subcommand("build-graph", "Build the graph sequence from a demonstration");
  std::string sequence_dir;
  bool dry_run = false;
  CommonOpts build_opts;
  build->add_option("sequence", sequence_dir, "Demonstration directory")->required();
  build->add_flag("--dry-run", dry_run, "Validate without writing");
  add_common(build, build_opts);

  // optimize
  auto* optimize = app.add_subcommand("optimize", "Ground the graph in simulation");
  std::string psag_file;
  CommonOpts opt_opts;
  optimize->add_option("psag", psag_file, "psag.json from build-graph")->required();
  add_common(optimize, opt_opts);

  // transfer
  auto* transfer = app.add_subcommand("transfer", "Retarget to a test scene and emit the program");
  std::string aug_file, test_dir;
  CommonOpts xfer_opts;
  transfer->add_option("psag_aug", aug_file, "psag_aug.json from optimize")->required();
  transfer->add_option("test_scene", test_dir, "Test scene directory")->required();
  add_common(transfer, xfer_opts);

  // dump-scene
  auto* dump = app.add_subcommand("dump-scene", "Replay a rollout as PLY frames");
  std::string dump_psag, dump_rollout;
  int every = 10;
  CommonOpts dump_opts;
  dump->add_option("psag", dump_psag, "psag.json or psag_aug.json")->required();
  dump->add_option("rollout", dump_rollout, "rollout.json")->required();
  dump->add_option("--every", every, "Write every n-th step");
  add_common(dump, dump_opts);

  // plot
  auto* plot = app.add_subcommand("plot", "Loss-curve SVG from report.json");
  std::string report_file, svg_out;
  plot->add_option("report", report_file, "report.json")->required();
  plot->add_option("-o,--out", svg_out, "Output SVG path")->required();

  // gen-demo
  auto* gen = app.add_subcommand("gen-demo", "Generate the synthetic press demonstration");
  CommonOpts gen_opts;
  std::string gen_test_dir;
  double gen_scale = 1.5;
  gen->add_option("--test-dir", gen_test_dir, "Also write a scaled test scene here");
  gen->add_option("--test-scale", gen_scale, "Test dough scale factor");
  add_common(gen, gen_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*build) {
      const auto config = make_config(build_opts);
      psag::PsagSequence seq = psag::run_build_graph(sequence_dir, config);
      print_warnings(seq.warnings);
      std::size_t edges = 0;
      for (const auto& f : seq.frames) edges += f.edges.size();
      std::cout << "frames: " << seq.frames.size() << "\n"
                << "nodes per frame: " << seq.frames.front().nodes.size() << "\n"
                << "edges total: " << edges << "\n"
                << "subtasks: " << seq.subtasks.size() << "\n"
                << "tool id: " << seq.tool_id << ", receptacle id: " << seq.receptacle_id << "\n";
      if (!dry_run) {
        fs::create_directories(build_opts.out_dir);
        psag::save_psag(seq, fs::path(build_opts.out_dir) / "psag.json");
        std::cout << "wrote " << (fs::path(build_opts.out_dir) / "psag.json").string() << "\n";
      }
    } else if (*optimize) {
      const auto config = make_config(opt_opts);
      psag::PsagSequence seq = psag::load_psag(psag_file);
      psag::OptimizeStageResult result = psag::run_optimize(seq, config);
      fs::create_directories(opt_opts.out_dir);
      const fs::path out(opt_opts.out_dir);
      psag::save_psag(result.augmented, out / "psag_aug.json");
      psag::save_rollout(result.run, result.augmented, out / "rollout.json");
      psag::save_report(result.run, out / "report.json");
      std::cout << "subtasks optimized: " << result.run.subtasks.size() << "\n"
                << "initial loss: " << result.run.initial_loss << "\n"
                << "final loss:   " << result.run.final_loss << "\n"
                << "wrote " << (out / "psag_aug.json").string() << ", rollout.json, report.json\n";
    } else if (*transfer) {
      const auto config = make_config(xfer_opts);
      psag::PsagSequence aug = psag::load_psag(aug_file);
      psag::xfer::TestScene test = psag::xfer::load_test_scene(test_dir, &aug);
      psag::TransferStageResult result = psag::run_transfer(aug, test, config);
      print_warnings(result.warnings);
      fs::create_directories(xfer_opts.out_dir);
      const fs::path out(xfer_opts.out_dir);
      psag::xfer::save_program(result.program, out / "program.json");
      psag::save_rollout(result.run, result.retargeted, out / "rollout.json");
      psag::save_report(result.run, out / "report.json");
      std::cout << "targets: " << result.program.targets.size() << " at " << config.program_rate_hz
                << " Hz\n"
                << "initial loss: " << result.run.initial_loss << "\n"
                << "final loss:   " << result.run.final_loss << "\n"
                << "wrote " << (out / "program.json").string() << "\n";
    } else if (*dump) {
      const auto config = make_config(dump_opts);
      psag::PsagSequence seq = psag::load_psag(dump_psag);
      psag::LoadedRollout rollout = psag::load_rollout(dump_rollout);
      const int written = psag::dump_scene_ply(seq, rollout, dump_opts.out_dir, every, config);
      std::cout << "wrote " << written << " PLY frames to " << dump_opts.out_dir << "\n";
    } else if (*plot) {
      psag::plot_report_svg(report_file, svg_out);
      std::cout << "wrote " << svg_out << "\n";
    } else if (*gen) {
      const auto config = make_config(gen_opts);
      psag::synth::PressDemoParams params;
      params.seed = config.seed;
      fs::create_directories(gen_opts.out_dir);
      psag::synth::generate_press_demo(gen_opts.out_dir, params);
      std::cout << "wrote demonstration to " << gen_opts.out_dir << "\n";
      if (!gen_test_dir.empty()) {
        psag::synth::PressTestParams test;
        test.demo = params;
        test.scale = gen_scale;
        fs::create_directories(gen_test_dir);
        psag::synth::generate_press_test_scene(gen_test_dir, test);
        std::cout << "wrote test scene to " << gen_test_dir << "\n";
      }
    }
  } catch (const psag::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const psag::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
