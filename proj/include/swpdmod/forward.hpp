#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "swpdmod/config.hpp"
#include "swpdmod/image.hpp"

namespace swpdmod {

// Bipolar THz probe pulse chi(t) = (t0 - t) exp(-(t-t0)^2 / (2 T^2)),
// zero for t < 0.
struct PulseSpec {
  double t0 = 1e-12;       // pulse center delay, seconds
  double width = 0.25e-12; // T, seconds
  void validate() const;
};
double pulse_value(const PulseSpec& spec, double t);

// Binary-reflectance dielectric slab. Echo round-trip time tau = n d / c.
struct SlabPhantom {
  ImageGrid reflectance;        // values in {rho0, rho1} exactly
  std::vector<uint8_t> labels;  // 0 = rho0 background, 1 = rho1 anomaly
  double rho0 = 0.3;
  double rho1 = 0.1;
  double thickness = 100e-6;          // d, meters
  double refraction_index = 1.5;      // n
  double wave_speed = 299792458.0;    // c, m/s

  double tau() const { return refraction_index * thickness / wave_speed; }
  void validate() const;
};

// Delta weights of the slab's reflection train before the outer rho factor:
// [(0, 1)] followed by (2 m tau, -(1-rho^2)/rho^2 * rho^(2m)) for m = 1..n.
std::vector<std::pair<double, double>> impulse_train(double rho, double tau_rho,
                                                     int n_reflections);

// Embedded 5x7 bitmap font scaled by nearest neighbor; '#' is a solid
// square, ' ' a blank (uniform rho0) phantom. glyph_fill sets the fraction
// of the raster the glyph box occupies.
SlabPhantom make_letter_phantom(int width, int height, char glyph, double rho0, double rho1,
                                double glyph_fill = 0.6, double pitch_x = 1e-4,
                                double pitch_y = 1e-4);
const std::string& supported_glyphs();

enum class NoiseMode { StackWide, PerFrame };

struct SimConfig {
  PulseSpec pulse;
  SlabPhantom phantom;
  double tilt_alpha1 = 1e-6;  // depth slope along x (columns)
  double tilt_alpha2 = 1e-4;  // depth slope along y (rows)
  double z0 = 0.0;            // nominal standoff, meters
  std::vector<double> sample_times;  // strictly increasing, >= 1 entry
  std::optional<double> snr_db;      // empty = noiseless
  NoiseMode noise_mode = NoiseMode::StackWide;
  uint64_t rng_seed = 1;
  int n_reflections = 5;
  void validate() const;
};

// M uniform sampling instants centered on the pulse delay.
std::vector<double> uniform_sample_times(const PulseSpec& pulse, int frames, double window);

// 64x64 'X' phantom, 10 uniform samples over 0.8 ps, noiseless.
SimConfig default_sim_config();
SimConfig parse_sim_config(KeyValueConfig& cfg);

// rho(x,y) * sum_k coeff_k * chi(t + z(x,y)/c - delay_k) at one pixel, with
// z(x,y) = z0 + alpha1 x + alpha2 y.
double reflected_field(const SimConfig& cfg, int pixel, double t);

struct SimResult {
  FrameStack stack;
  SlabPhantom phantom;
  Eigen::MatrixXd true_distortions;  // P x M, column j = u_j (field / rho)
  double noise_sigma_sq = 0.0;       // realized noise variance; 0 when noiseless
};
SimResult simulate_stack(const SimConfig& cfg);

// Stack directory plus ground-truth sidecars (truth_rho.raw, truth_labels.raw,
// truth_labels.pgm, truth_distortions.raw) and simulation metadata.
void write_sim_result(const SimResult& result, const SimConfig& cfg,
                      const std::filesystem::path& dir);

struct GroundTruth {
  ImageGrid rho;
  std::vector<uint8_t> labels;
  Eigen::MatrixXd distortions;  // P x M
};
GroundTruth read_ground_truth(const std::filesystem::path& dir, const GridShape& expected);

}  // namespace swpdmod
