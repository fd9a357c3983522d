#pragma once

#include "psag/config.hpp"

namespace psag {

/// build-graph: load, track, filter, build, segment.
PsagSequence run_build_graph(const std::filesystem::path& sequence_dir,
                             const PipelineConfig& config);

struct OptimizeStageResult {
  PsagSequence augmented;  // wrench-annotated copy of the input sequence
  opt::SequenceRunResult run;
};

/// optimize: subtask-chain trajectory optimization on the demonstration
/// scene, then force/torque annotation of the graph.
OptimizeStageResult run_optimize(const PsagSequence& seq, const PipelineConfig& config);

struct TransferStageResult {
  PsagSequence retargeted;
  opt::SequenceRunResult run;
  xfer::ControllerProgram program;
  Warnings warnings;
};

/// transfer: ground the test scene, retarget, re-optimize at real scale,
/// emit the hybrid motion-force controller program.
TransferStageResult run_transfer(const PsagSequence& augmented, const xfer::TestScene& test,
                                 const PipelineConfig& config);

// ------------------------------------------------------------------ artifacts

/// rollout.json: optimized actions plus per-step actuator poses and wrenches.
void save_rollout(const opt::SequenceRunResult& run, const PsagSequence& seq,
                  const std::filesystem::path& file);

struct LoadedRollout {
  double dt = 0.0;
  std::vector<int> actuator_ids;
  struct SubtaskActions {
    int index = 0;
    double start_time = 0.0;
    sim::ActionSequence actions;
  };
  std::vector<SubtaskActions> subtasks;
};
LoadedRollout load_rollout(const std::filesystem::path& file);

/// report.json: loss curves and per-term breakdowns per subtask.
void save_report(const opt::SequenceRunResult& run, const std::filesystem::path& file);

/// Re-runs a loaded rollout deterministically, writing one PLY per `every`
/// steps into `out_dir`. Returns the number of files written.
int dump_scene_ply(const PsagSequence& seq, const LoadedRollout& rollout,
                   const std::filesystem::path& out_dir, int every, const PipelineConfig& config);

/// Loss-curve SVG from report.json: one polyline per cost term.
void plot_report_svg(const std::filesystem::path& report_file,
                     const std::filesystem::path& svg_file);

}  // namespace psag
