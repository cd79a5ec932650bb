#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "swpdmod/altmin.hpp"
#include "swpdmod/config.hpp"
#include "swpdmod/forward.hpp"
#include "swpdmod/image.hpp"

namespace swpdmod {

double mse(const ImageGrid& estimate, const ImageGrid& reference);

// Snap to the nearer of {rho0, rho1}; exact midpoints take rho0.
ImageGrid binary_round(const ImageGrid& estimate, double rho0, double rho1);

double misclassification_rate(const std::vector<uint8_t>& estimate,
                              const std::vector<uint8_t>& reference);

// Least-squares scale fix c = <est, ref> / <est, est> for methods that only
// recover the image up to a constant multiple.
ImageGrid align_scale(const ImageGrid& estimate, const ImageGrid& reference);

enum class SubspaceMode { Oracle, Wavelet };
std::string subspace_mode_name(SubspaceMode mode);

struct SweepExperimentConfig {
  std::vector<int> frame_counts;   // frames sweep points
  std::vector<double> snr_values;  // SNR sweep points, dB
  int trials = 10;
  SubspaceMode subspace_mode = SubspaceMode::Wavelet;
  int n_coeffs = 100;  // wavelet-mode subspace size
  uint64_t seed = 1;
  void validate() const;
};

struct SweepRow {
  double x = 0.0;  // M or SNR depending on the sweep
  std::string mode;
  double mse_raw = 0.0;
  double mse_rounded = 0.0;
  int trials = 0;  // trials that produced a finite result
  double misclass_rate = 0.0;
  int flagged = 0;  // diverged or non-finite trials, kept visible
};

struct SweepTable {
  std::string x_name;  // "m" or "snr_db"
  std::vector<SweepRow> rows;
};

// Frame-count sweep: per trial, simulate the full pool once, draw M frames
// without replacement, solve in the configured mode. Stacks and subsets are
// functions of (seed, point, trial) only, so oracle and wavelet runs with the
// same seed see identical data.
SweepTable run_frames_sweep(const SweepExperimentConfig& cfg, const SimConfig& sim,
                            const PriorConfig& prior, const SolverOptions& opts);

// SNR sweep: full stack at each SNR point, fresh noise per trial.
SweepTable run_snr_sweep(const SweepExperimentConfig& cfg, const SimConfig& sim,
                         const PriorConfig& prior, const SolverOptions& opts);

std::string sweep_csv(const SweepTable& table);
void write_sweep_csv(const SweepTable& table, const std::filesystem::path& path);

SweepExperimentConfig parse_sweep_config(KeyValueConfig& kv);

}  // namespace swpdmod
