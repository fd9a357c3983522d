#pragma once

#include <filesystem>
#include <string>

#include "psag/graph.hpp"
#include "psag/optimizer.hpp"
#include "psag/transfer.hpp"

namespace psag {

/// One configuration object drives every pipeline stage. JSON files overlay
/// onto the defaults; command-line flags overlay last.
struct PipelineConfig {
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = PSAG_THREADS env or hardware default

  GraphParams graph;
  opt::SequenceConfig sequence;
  xfer::Gains gains;
  xfer::FeasibilityParams feasibility;
  double program_rate_hz = 10.0;

  /// Overlay values from a JSON document (text form). Unknown keys error.
  void apply_json_text(const std::string& text, const std::string& origin);
  void apply_file(const std::filesystem::path& file);
  /// Push shared knobs (seed, threads) into the member structs.
  void finalize();
};

}  // namespace psag
