#include "swpdmod/reference.hpp"

#include <cmath>

#include "swpdmod/altmin.hpp"

namespace swpdmod::ref {

namespace {

int pad_up(int n, int block) { return ((n + block - 1) / block) * block; }

// One full separable analysis level on the top-left cw x ch block.
void analyze_level(std::vector<double>& buf, int pw, int cw, int ch, const WaveletBank& bank) {
  const int taps = static_cast<int>(bank.lowpass.size());
  std::vector<double> tmp(static_cast<size_t>(std::max(cw, ch)));
  for (int r = 0; r < ch; ++r) {
    for (int i = 0; i < cw / 2; ++i) {
      double a = 0.0, d = 0.0;
      for (int k = 0; k < taps; ++k) {
        const double v = buf[static_cast<size_t>(r) * pw + (2 * i + k) % cw];
        a += bank.lowpass[k] * v;
        d += bank.highpass[k] * v;
      }
      tmp[i] = a;
      tmp[cw / 2 + i] = d;
    }
    for (int c = 0; c < cw; ++c) buf[static_cast<size_t>(r) * pw + c] = tmp[c];
  }
  for (int c = 0; c < cw; ++c) {
    for (int i = 0; i < ch / 2; ++i) {
      double a = 0.0, d = 0.0;
      for (int k = 0; k < taps; ++k) {
        const double v = buf[static_cast<size_t>((2 * i + k) % ch) * pw + c];
        a += bank.lowpass[k] * v;
        d += bank.highpass[k] * v;
      }
      tmp[i] = a;
      tmp[ch / 2 + i] = d;
    }
    for (int r = 0; r < ch; ++r) buf[static_cast<size_t>(r) * pw + c] = tmp[r];
  }
}

void synthesize_level(std::vector<double>& buf, int pw, int cw, int ch, const WaveletBank& bank) {
  const int taps = static_cast<int>(bank.lowpass.size());
  std::vector<double> tmp(static_cast<size_t>(std::max(cw, ch)), 0.0);
  for (int c = 0; c < cw; ++c) {
    std::fill(tmp.begin(), tmp.begin() + ch, 0.0);
    for (int i = 0; i < ch / 2; ++i) {
      const double a = buf[static_cast<size_t>(i) * pw + c];
      const double d = buf[static_cast<size_t>(ch / 2 + i) * pw + c];
      for (int k = 0; k < taps; ++k)
        tmp[(2 * i + k) % ch] += bank.lowpass[k] * a + bank.highpass[k] * d;
    }
    for (int r = 0; r < ch; ++r) buf[static_cast<size_t>(r) * pw + c] = tmp[r];
  }
  for (int r = 0; r < ch; ++r) {
    std::fill(tmp.begin(), tmp.begin() + cw, 0.0);
    for (int i = 0; i < cw / 2; ++i) {
      const double a = buf[static_cast<size_t>(r) * pw + i];
      const double d = buf[static_cast<size_t>(r) * pw + cw / 2 + i];
      for (int k = 0; k < taps; ++k)
        tmp[(2 * i + k) % cw] += bank.lowpass[k] * a + bank.highpass[k] * d;
    }
    for (int c = 0; c < cw; ++c) buf[static_cast<size_t>(r) * pw + c] = tmp[c];
  }
}

}  // namespace

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> simulate_clean(const SimConfig& cfg) {
  cfg.validate();
  const GridShape& shape = cfg.phantom.reflectance.shape;
  const int p = shape.pixels();
  const int m = static_cast<int>(cfg.sample_times.size());
  Eigen::MatrixXd u(p, m), y(p, m);
  for (int i = 0; i < p; ++i) {
    const double rho = cfg.phantom.reflectance.values[i];
    const int row = i / shape.width;
    const int col = i % shape.width;
    const double depth = cfg.z0 + cfg.tilt_alpha1 * (col * shape.pitch_x) +
                         cfg.tilt_alpha2 * (row * shape.pitch_y);
    const auto train = impulse_train(rho, cfg.phantom.tau(), cfg.n_reflections);
    for (int j = 0; j < m; ++j) {
      const double t = cfg.sample_times[j] + depth / cfg.phantom.wave_speed;
      double acc = 0.0;
      for (const auto& [delay, coeff] : train) acc += coeff * pulse_value(cfg.pulse, t - delay);
      u(i, j) = acc;
      y(i, j) = rho * acc;
    }
  }
  return {std::move(u), std::move(y)};
}

WaveletCoeffs dwt2_forward(const ImageGrid& image, const WaveletBank& bank) {
  image.validate();
  const int block = 1 << bank.levels;
  const int pw = pad_up(std::max(image.shape.width, block), block);
  const int ph = pad_up(std::max(image.shape.height, block), block);
  const int px = (pw - image.shape.width) / 2;
  const int py = (ph - image.shape.height) / 2;

  std::vector<double> buf(static_cast<size_t>(pw) * ph, 0.0);
  for (int r = 0; r < image.shape.height; ++r)
    for (int c = 0; c < image.shape.width; ++c)
      buf[static_cast<size_t>(r + py) * pw + (c + px)] =
          image.values[pixel_index(image.shape, r, c)];

  for (int level = 0; level < bank.levels; ++level)
    analyze_level(buf, pw, pw >> level, ph >> level, bank);

  WaveletCoeffs out;
  out.orig_shape = image.shape;
  out.padded_width = pw;
  out.padded_height = ph;
  out.levels = bank.levels;
  out.data = Eigen::Map<Eigen::VectorXd>(buf.data(), static_cast<Eigen::Index>(buf.size()));
  return out;
}

ImageGrid dwt2_inverse(const WaveletCoeffs& coeffs, const WaveletBank& bank) {
  const int pw = coeffs.padded_width;
  const int ph = coeffs.padded_height;
  std::vector<double> buf(coeffs.data.data(), coeffs.data.data() + coeffs.data.size());
  for (int level = bank.levels - 1; level >= 0; --level)
    synthesize_level(buf, pw, pw >> level, ph >> level, bank);

  const int px = (pw - coeffs.orig_shape.width) / 2;
  const int py = (ph - coeffs.orig_shape.height) / 2;
  Eigen::VectorXd values(coeffs.orig_shape.pixels());
  for (int r = 0; r < coeffs.orig_shape.height; ++r)
    for (int c = 0; c < coeffs.orig_shape.width; ++c)
      values[pixel_index(coeffs.orig_shape, r, c)] =
          buf[static_cast<size_t>(r + py) * pw + (c + px)];
  return ImageGrid(coeffs.orig_shape, std::move(values));
}

Eigen::VectorXd sweep_update(const Eigen::VectorXd& y_j, const Eigen::VectorXd& rho,
                             const SweepSubspace& s_j, double rho_floor) {
  const Eigen::MatrixXd scaled = rho.array().max(rho_floor).matrix().asDiagonal() * s_j.basis;
  const Eigen::MatrixXd gram = scaled.transpose() * scaled;
  const Eigen::VectorXd rhs = scaled.transpose() * y_j;
  return gram.ldlt().solve(rhs);
}

std::pair<Eigen::VectorXd, std::vector<uint8_t>> pixel_pass(const Eigen::MatrixXd& frames,
                                                            const Eigen::MatrixXd& distortions,
                                                            const PriorConfig& prior,
                                                            bool exact_truncation) {
  const Eigen::Index p = frames.rows();
  Eigen::VectorXd rho(p);
  std::vector<uint8_t> labels(static_cast<size_t>(p));
  for (Eigen::Index i = 0; i < p; ++i) {
    const Eigen::VectorXd y_row = frames.row(i).transpose();
    const Eigen::VectorXd u_row = distortions.row(i).transpose();
    const double w0 = map_pixel_update(static_cast<int>(i), y_row, u_row, prior, 0);
    const double w1 = map_pixel_update(static_cast<int>(i), y_row, u_row, prior, 1);
    const auto [value, label] = classify_pixel(w0, w1, y_row, u_row, prior, exact_truncation);
    rho[i] = value;
    labels[static_cast<size_t>(i)] = label;
  }
  return {std::move(rho), std::move(labels)};
}

Eigen::MatrixXd apply_operator(const MeasurementOperator& op, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(op.p, op.m);
  for (int j = 0; j < op.m; ++j) {
    const Eigen::MatrixXd& s = op.bases[j];
    for (int i = 0; i < op.p; ++i) {
      double acc = 0.0;
      for (int n = 0; n < s.cols(); ++n) {
        double q_x = 0.0;  // (Q X)_{i, offset+n}
        if (op.identity_q()) {
          q_x = x(i, op.offsets[j] + n);
        } else {
          for (int k = 0; k < op.k; ++k) q_x += op.q(i, k) * x(k, op.offsets[j] + n);
        }
        acc += q_x * s(i, n);
      }
      out(i, j) = acc;
    }
  }
  return out;
}

Eigen::MatrixXd apply_adjoint(const MeasurementOperator& op, const Eigen::MatrixXd& r) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(op.k, op.total_coeffs);
  for (int j = 0; j < op.m; ++j) {
    const Eigen::MatrixXd& s = op.bases[j];
    for (int i = 0; i < op.p; ++i) {
      for (int n = 0; n < s.cols(); ++n) {
        const double w = r(i, j) * s(i, n);
        if (op.identity_q()) {
          out(i, op.offsets[j] + n) += w;
        } else {
          for (int k = 0; k < op.k; ++k) out(k, op.offsets[j] + n) += op.q(i, k) * w;
        }
      }
    }
  }
  return out;
}

}  // namespace swpdmod::ref
