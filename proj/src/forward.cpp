#include "swpdmod/forward.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "swpdmod/io.hpp"
#include "swpdmod/rng.hpp"

namespace swpdmod {

namespace {

// 5x7 glyph bitmaps; '#' is a 1x1 solid cell (scales to a filled square),
// ' ' a 1x1 empty cell (uniform background phantom).
const std::map<char, std::vector<std::string>>& glyph_font() {
  static const std::map<char, std::vector<std::string>> font = {
      {'A', {"01110", "10001", "10001", "11111", "10001", "10001", "10001"}},
      {'B', {"11110", "10001", "10001", "11110", "10001", "10001", "11110"}},
      {'C', {"01111", "10000", "10000", "10000", "10000", "10000", "01111"}},
      {'E', {"11111", "10000", "10000", "11110", "10000", "10000", "11111"}},
      {'F', {"11111", "10000", "10000", "11110", "10000", "10000", "10000"}},
      {'H', {"10001", "10001", "10001", "11111", "10001", "10001", "10001"}},
      {'I', {"11111", "00100", "00100", "00100", "00100", "00100", "11111"}},
      {'L', {"10000", "10000", "10000", "10000", "10000", "10000", "11111"}},
      {'M', {"10001", "11011", "10101", "10101", "10001", "10001", "10001"}},
      {'N', {"10001", "11001", "10101", "10011", "10001", "10001", "10001"}},
      {'O', {"01110", "10001", "10001", "10001", "10001", "10001", "01110"}},
      {'T', {"11111", "00100", "00100", "00100", "00100", "00100", "00100"}},
      {'U', {"10001", "10001", "10001", "10001", "10001", "10001", "01110"}},
      {'X', {"10001", "01010", "00100", "00100", "00100", "01010", "10001"}},
      {'Y', {"10001", "01010", "00100", "00100", "00100", "00100", "00100"}},
      {'Z', {"11111", "00001", "00010", "00100", "01000", "10000", "11111"}},
      {'#', {"1"}},
      {' ', {"0"}},
  };
  return font;
}

// Echo weights for one pixel's reflectance; entry m of the train, m >= 1,
// carries -(1-rho^2) rho^(2(m-1)) at delay 2 m tau, after the front-surface
// (0, 1) term.
double train_sum(double rho, double tau, int n_reflections, const PulseSpec& pulse,
                 double t_shifted) {
  double acc = pulse_value(pulse, t_shifted);
  const double decay = rho * rho;
  double coeff = -(1.0 - decay);
  double delay = 0.0;
  for (int m = 1; m <= n_reflections; ++m) {
    delay += 2.0 * tau;
    acc += coeff * pulse_value(pulse, t_shifted - delay);
    coeff *= decay;
  }
  return acc;
}

double pixel_depth(const SimConfig& cfg, int pixel) {
  const GridShape& g = cfg.phantom.reflectance.shape;
  const int row = pixel / g.width;
  const int col = pixel % g.width;
  return cfg.z0 + cfg.tilt_alpha1 * (col * g.pitch_x) + cfg.tilt_alpha2 * (row * g.pitch_y);
}

}  // namespace

void PulseSpec::validate() const {
  if (!(t0 > 0.0)) throw ContractError("PulseSpec: t0 must be > 0");
  if (!(width > 0.0)) throw ContractError("PulseSpec: width must be > 0");
}

double pulse_value(const PulseSpec& spec, double t) {
  if (t < 0.0) return 0.0;
  const double d = t - spec.t0;
  return -d * std::exp(-d * d / (2.0 * spec.width * spec.width));
}

void SlabPhantom::validate() const {
  reflectance.validate();
  if (static_cast<int>(labels.size()) != reflectance.shape.pixels())
    throw ContractError("SlabPhantom: label count does not match grid");
  if (!(rho0 > 0.0 && rho0 < 1.0 && rho1 > 0.0 && rho1 < 1.0))
    throw ContractError("SlabPhantom: reflectances must lie in (0,1)");
  for (int i = 0; i < reflectance.shape.pixels(); ++i) {
    if (labels[i] > 1) throw ContractError("SlabPhantom: labels must be 0 or 1");
    const double expect = labels[i] ? rho1 : rho0;
    if (reflectance.values[i] != expect)
      throw ContractError("SlabPhantom: pixel " + std::to_string(i) +
                          " value disagrees with its label");
  }
  if (!(thickness > 0.0)) throw ContractError("SlabPhantom: thickness must be > 0");
  if (!(refraction_index >= 1.0)) throw ContractError("SlabPhantom: refraction index must be >= 1");
  if (!(wave_speed > 0.0)) throw ContractError("SlabPhantom: wave speed must be > 0");
}

std::vector<std::pair<double, double>> impulse_train(double rho, double tau_rho,
                                                     int n_reflections) {
  if (!(rho > 0.0 && rho < 1.0))
    throw DomainError("impulse_train: rho must lie in (0,1), got " + format_double(rho));
  if (!(tau_rho > 0.0)) throw DomainError("impulse_train: tau must be > 0");
  if (n_reflections < 1) throw ContractError("impulse_train: n_reflections must be >= 1");
  std::vector<std::pair<double, double>> train;
  train.reserve(static_cast<size_t>(n_reflections) + 1);
  train.emplace_back(0.0, 1.0);
  const double decay = rho * rho;
  double coeff = -(1.0 - decay);
  for (int m = 1; m <= n_reflections; ++m) {
    train.emplace_back(2.0 * m * tau_rho, coeff);
    coeff *= decay;
  }
  return train;
}

const std::string& supported_glyphs() {
  static const std::string glyphs = [] {
    std::string s;
    for (const auto& [c, rows] : glyph_font()) s.push_back(c);
    return s;
  }();
  return glyphs;
}

SlabPhantom make_letter_phantom(int width, int height, char glyph, double rho0, double rho1,
                                double glyph_fill, double pitch_x, double pitch_y) {
  if (width < 1 || height < 1) throw ContractError("make_letter_phantom: empty raster");
  if (!(glyph_fill > 0.0 && glyph_fill <= 1.0))
    throw ContractError("make_letter_phantom: glyph_fill must lie in (0,1]");
  const char key = static_cast<char>(std::toupper(static_cast<unsigned char>(glyph)));
  auto it = glyph_font().find(key);
  if (it == glyph_font().end())
    throw DomainError(std::string("unsupported glyph '") + glyph + "' (supported: \"" +
                      supported_glyphs() + "\")");
  const std::vector<std::string>& bitmap = it->second;
  const int bh = static_cast<int>(bitmap.size());
  const int bw = static_cast<int>(bitmap[0].size());

  const int scale = std::max(
      1, static_cast<int>(std::floor(std::min(glyph_fill * width / bw, glyph_fill * height / bh))));
  const int gw = bw * scale;
  const int gh = bh * scale;
  if (gw > width || gh > height)
    throw DomainError(std::string("glyph '") + key + "' does not fit a " +
                      std::to_string(width) + "x" + std::to_string(height) + " raster");
  const int x0 = (width - gw) / 2;
  const int y0 = (height - gh) / 2;

  SlabPhantom phantom;
  phantom.rho0 = rho0;
  phantom.rho1 = rho1;
  GridShape shape{width, height, pitch_x, pitch_y};
  Eigen::VectorXd values = Eigen::VectorXd::Constant(shape.pixels(), rho0);
  phantom.labels.assign(static_cast<size_t>(shape.pixels()), 0);
  for (int r = 0; r < gh; ++r) {
    for (int c = 0; c < gw; ++c) {
      if (bitmap[r / scale][c / scale] != '1') continue;
      const int i = pixel_index(shape, y0 + r, x0 + c);
      values[i] = rho1;
      phantom.labels[i] = 1;
    }
  }
  phantom.reflectance = ImageGrid(shape, std::move(values));
  phantom.validate();
  return phantom;
}

std::vector<double> uniform_sample_times(const PulseSpec& pulse, int frames, double window) {
  if (frames < 1) throw ContractError("uniform_sample_times: frames must be >= 1");
  if (!(window >= 0.0)) throw ContractError("uniform_sample_times: window must be >= 0");
  std::vector<double> times(frames);
  if (frames == 1) {
    times[0] = pulse.t0;
    return times;
  }
  const double start = pulse.t0 - window / 2.0;
  for (int j = 0; j < frames; ++j) times[j] = start + window * j / (frames - 1);
  return times;
}

void SimConfig::validate() const {
  pulse.validate();
  phantom.validate();
  if (n_reflections < 1) throw ContractError("SimConfig: n_reflections must be >= 1");
  if (sample_times.empty()) throw ContractError("SimConfig: at least one sample time required");
  for (size_t j = 0; j + 1 < sample_times.size(); ++j)
    if (!(sample_times[j] < sample_times[j + 1]))
      throw ContractError("SimConfig: sample_times must be strictly increasing");
  for (double t : sample_times)
    if (!std::isfinite(t)) throw ContractError("SimConfig: non-finite sample time");
  if (snr_db && !std::isfinite(*snr_db)) throw ContractError("SimConfig: non-finite snr_db");
}

SimConfig default_sim_config() {
  SimConfig cfg;
  cfg.phantom = make_letter_phantom(64, 64, 'X', 0.3, 0.1);
  cfg.sample_times = uniform_sample_times(cfg.pulse, 10, 0.8e-12);
  return cfg;
}

SimConfig parse_sim_config(KeyValueConfig& kv) {
  SimConfig cfg;
  const int width = kv.get_int("width", 64);
  const int height = kv.get_int("height", 64);
  const double pitch_x = kv.get_double("pitch_x", 1e-4);
  const double pitch_y = kv.get_double("pitch_y", 1e-4);
  const double rho0 = kv.get_double("rho0", 0.3);
  const double rho1 = kv.get_double("rho1", 0.1);
  const double fill = kv.get_double("glyph_fill", 0.6);

  // '#' would start a comment in the config grammar, so the solid phantom is
  // spelled out; an empty value (or "blank") selects the uniform background.
  std::string glyph_text = kv.get_string("glyph", "X");
  char glyph = 'X';
  if (glyph_text.empty() || glyph_text == "blank" || glyph_text == "space") glyph = ' ';
  else if (glyph_text == "solid") glyph = '#';
  else if (glyph_text.size() == 1) glyph = glyph_text[0];
  else kv.fail("glyph", "expected one letter, 'solid', or 'blank', got '" + glyph_text + "'");

  try {
    cfg.phantom = make_letter_phantom(width, height, glyph, rho0, rho1, fill, pitch_x, pitch_y);
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid phantom configuration: ") + e.what());
  }
  cfg.phantom.thickness = kv.get_double("thickness", cfg.phantom.thickness);
  cfg.phantom.refraction_index = kv.get_double("refraction_index", cfg.phantom.refraction_index);
  cfg.phantom.wave_speed = kv.get_double("wave_speed", cfg.phantom.wave_speed);

  cfg.pulse.t0 = kv.get_double("pulse_t0", cfg.pulse.t0);
  cfg.pulse.width = kv.get_double("pulse_width", cfg.pulse.width);
  cfg.tilt_alpha1 = kv.get_double("tilt_alpha1", cfg.tilt_alpha1);
  cfg.tilt_alpha2 = kv.get_double("tilt_alpha2", cfg.tilt_alpha2);
  cfg.z0 = kv.get_double("z0", cfg.z0);
  cfg.n_reflections = kv.get_int("n_reflections", cfg.n_reflections);

  if (kv.has("sample_times")) {
    cfg.sample_times = kv.get_double_list("sample_times", {});
    if (kv.has("frames")) kv.fail("frames", "frames and sample_times are mutually exclusive");
    if (kv.has("window")) kv.fail("window", "window and sample_times are mutually exclusive");
  } else {
    const int frames = kv.get_int("frames", 10);
    const double window = kv.get_double("window", 0.8e-12);
    cfg.sample_times = uniform_sample_times(cfg.pulse, frames, window);
  }

  if (kv.has("snr_db")) cfg.snr_db = kv.get_double("snr_db", 0.0);
  const std::string mode = kv.get_string("noise_mode", "stack");
  if (mode == "stack") cfg.noise_mode = NoiseMode::StackWide;
  else if (mode == "per_frame") cfg.noise_mode = NoiseMode::PerFrame;
  else kv.fail("noise_mode", "expected 'stack' or 'per_frame', got '" + mode + "'");
  cfg.rng_seed = kv.get_uint64("seed", cfg.rng_seed);

  try {
    cfg.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid simulation configuration: ") + e.what());
  }
  return cfg;
}

double reflected_field(const SimConfig& cfg, int pixel, double t) {
  const ImageGrid& image = cfg.phantom.reflectance;
  if (pixel < 0 || pixel >= image.shape.pixels())
    throw ContractError("reflected_field: pixel index out of range");
  const double rho = image.values[pixel];
  const double inv_c = 1.0 / cfg.phantom.wave_speed;
  const double shifted = t + pixel_depth(cfg, pixel) * inv_c;
  return rho * train_sum(rho, cfg.phantom.tau(), cfg.n_reflections, cfg.pulse, shifted);
}

SimResult simulate_stack(const SimConfig& cfg) {
  cfg.validate();
  const GridShape& shape = cfg.phantom.reflectance.shape;
  const int p = shape.pixels();
  const int m = static_cast<int>(cfg.sample_times.size());
  const double tau = cfg.phantom.tau();
  const double inv_c = 1.0 / cfg.phantom.wave_speed;

  SimResult result;
  result.phantom = cfg.phantom;
  result.true_distortions.resize(p, m);
  Eigen::MatrixXd clean(p, m);

#pragma omp parallel for schedule(static)
  for (int i = 0; i < p; ++i) {
    const double rho = cfg.phantom.reflectance.values[i];
    const double depth_delay = pixel_depth(cfg, i) * inv_c;
    for (int j = 0; j < m; ++j) {
      const double u =
          train_sum(rho, tau, cfg.n_reflections, cfg.pulse, cfg.sample_times[j] + depth_delay);
      result.true_distortions(i, j) = u;
      clean(i, j) = rho * u;
    }
  }

  result.stack.shape = shape;
  result.stack.sample_times = cfg.sample_times;
  if (!cfg.snr_db) {
    result.stack.frames = std::move(clean);
    result.noise_sigma_sq = 0.0;
    result.stack.validate();
    return result;
  }

  const double ratio = std::pow(10.0, *cfg.snr_db / 10.0);
  const double stack_power = clean.squaredNorm() / (static_cast<double>(p) * m);
  if (!(stack_power > 0.0))
    throw DomainError("simulate_stack: SNR requested on an all-zero signal");

  Eigen::MatrixXd noisy(p, m);
  if (cfg.noise_mode == NoiseMode::StackWide) {
    const double sigma = std::sqrt(stack_power / ratio);
#pragma omp parallel for schedule(static)
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < p; ++i)
        noisy(i, j) = clean(i, j) +
                      sigma * gaussian(cfg.rng_seed, static_cast<uint64_t>(i) +
                                                         static_cast<uint64_t>(j) * p);
    result.noise_sigma_sq = stack_power / ratio;
  } else {
    // Per-frame normalization: each frame gets its own sigma so every frame
    // individually meets the requested SNR. The mean variance equals the
    // stack-wide value, which is what a single-sigma solver consumes.
#pragma omp parallel for schedule(static)
    for (int j = 0; j < m; ++j) {
      const double fp = clean.col(j).squaredNorm() / p;
      const double sigma = fp > 0.0 ? std::sqrt(fp / ratio) : 0.0;
      for (int i = 0; i < p; ++i)
        noisy(i, j) = clean(i, j) +
                      sigma * gaussian(cfg.rng_seed, static_cast<uint64_t>(i) +
                                                         static_cast<uint64_t>(j) * p);
    }
    result.noise_sigma_sq = stack_power / ratio;
  }
  result.stack.frames = std::move(noisy);
  result.stack.validate();
  return result;
}

void write_sim_result(const SimResult& result, const SimConfig& cfg,
                      const std::filesystem::path& dir) {
  std::map<std::string, std::string> meta;
  meta["noise_sigma_sq"] = format_double(result.noise_sigma_sq);
  if (cfg.snr_db) meta["snr_db"] = format_double(*cfg.snr_db);
  meta["noise_mode"] = cfg.noise_mode == NoiseMode::StackWide ? "stack" : "per_frame";
  meta["seed"] = std::to_string(cfg.rng_seed);
  meta["n_reflections"] = std::to_string(cfg.n_reflections);
  meta["tilt_alpha1"] = format_double(cfg.tilt_alpha1);
  meta["tilt_alpha2"] = format_double(cfg.tilt_alpha2);
  meta["z0"] = format_double(cfg.z0);
  meta["pulse_t0"] = format_double(cfg.pulse.t0);
  meta["pulse_width"] = format_double(cfg.pulse.width);
  meta["rho0"] = format_double(result.phantom.rho0);
  meta["rho1"] = format_double(result.phantom.rho1);
  meta["thickness"] = format_double(result.phantom.thickness);
  meta["refraction_index"] = format_double(result.phantom.refraction_index);
  meta["wave_speed"] = format_double(result.phantom.wave_speed);
  write_frame_stack(result.stack, dir, meta);

  const GridShape& shape = result.stack.shape;
  write_raw_matrix(dir / "truth_rho.raw", shape, result.phantom.reflectance.values);
  Eigen::VectorXd labels(shape.pixels());
  for (int i = 0; i < shape.pixels(); ++i) labels[i] = result.phantom.labels[i];
  write_raw_matrix(dir / "truth_labels.raw", shape, labels);
  write_pgm16(dir / "truth_labels.pgm", shape, labels);
  write_raw_matrix(dir / "truth_distortions.raw", shape, result.true_distortions);
}

GroundTruth read_ground_truth(const std::filesystem::path& dir, const GridShape& expected) {
  GroundTruth truth;
  const RawMatrix rho = read_raw_matrix(dir / "truth_rho.raw");
  if (rho.shape.width != expected.width || rho.shape.height != expected.height ||
      rho.data.cols() != 1)
    throw FormatError("truth_rho.raw dimensions disagree with the stack: " + dir.string());
  GridShape shape = expected;
  truth.rho = ImageGrid(shape, rho.data.col(0));

  const RawMatrix labels = read_raw_matrix(dir / "truth_labels.raw");
  if (labels.shape.width != expected.width || labels.shape.height != expected.height ||
      labels.data.cols() != 1)
    throw FormatError("truth_labels.raw dimensions disagree with the stack: " + dir.string());
  truth.labels.resize(static_cast<size_t>(expected.pixels()));
  for (int i = 0; i < expected.pixels(); ++i) truth.labels[i] = labels.data(i, 0) >= 0.5 ? 1 : 0;

  const RawMatrix dist = read_raw_matrix(dir / "truth_distortions.raw");
  if (dist.shape.width != expected.width || dist.shape.height != expected.height)
    throw FormatError("truth_distortions.raw dimensions disagree with the stack: " + dir.string());
  truth.distortions = dist.data;
  return truth;
}

}  // namespace swpdmod
