#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace psag {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Error taxonomy shared by all modules. The CLI maps these to exit codes:
/// validation-class errors exit 2, numerical failures exit 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad argument passed to an operation (non-positive voxel size, ...).
struct ArgumentError : Error {
  using Error::Error;
};

/// Malformed file: missing manifest, bad CSV, wrong schema version.
struct FormatError : Error {
  using Error::Error;
};

/// Structurally valid input that violates an invariant (unknown instance id,
/// non-monotone timestamps, infeasible scene).
struct ValidationError : Error {
  using Error::Error;
};

/// NaN or unstable state inside a numerical routine.
struct NumericalError : Error {
  using Error::Error;
};

/// Requested work exceeds the configured resource budget.
struct ResourceError : Error {
  using Error::Error;
};

/// ICP could not find enough overlap between the clouds.
struct LowOverlapError : Error {
  using Error::Error;
};

/// Worker-thread cap. Resolution order: explicit set_thread_count() call,
/// PSAG_THREADS env var, hardware concurrency.
int thread_count();
void set_thread_count(int n);

/// Static-partition parallel map over [0, n). Each worker handles one
/// contiguous chunk; chunk boundaries depend only on n and thread_count(),
/// so any reduction done per-chunk and merged in chunk order is
/// deterministic for a fixed thread count.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& chunk_fn);

/// Accumulated non-fatal diagnostics (dropped points, pose jumps, ...).
using Warnings = std::vector<std::string>;

}  // namespace psag
