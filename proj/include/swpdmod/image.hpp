#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "swpdmod/errors.hpp"

namespace swpdmod {

struct GridShape {
  int width = 0;
  int height = 0;
  double pitch_x = 1e-4;  // meters per pixel
  double pitch_y = 1e-4;

  int pixels() const { return width * height; }
  bool operator==(const GridShape&) const = default;
};

// Vectorization is row-major everywhere: pixel (row r, col c) sits at
// index r*width + c, so frames and subspace matrices index identically.
inline int pixel_index(const GridShape& g, int row, int col) {
  return row * g.width + col;
}

struct ImageGrid {
  GridShape shape;
  Eigen::VectorXd values;  // length width*height

  ImageGrid() = default;
  ImageGrid(GridShape s, Eigen::VectorXd v) : shape(s), values(std::move(v)) { validate(); }
  void validate() const;
};

struct FrameStack {
  GridShape shape;
  Eigen::MatrixXd frames;            // P x M, column j = vectorized frame j
  std::vector<double> sample_times;  // empty, or size M strictly increasing

  int frame_count() const { return static_cast<int>(frames.cols()); }
  void validate() const;
};

struct PriorConfig {
  double rho0 = 0.3;
  double rho1 = 0.1;
  double sigma0_sq = 1e-10;
  double sigma1_sq = 1e-10;
  double p0 = 0.5;
  double p1 = 0.5;
  double noise_sigma_sq = 0.0;  // 0 = not yet resolved; solving requires > 0

  double class_mean(int c) const { return c == 0 ? rho0 : rho1; }
  double class_var(int c) const { return c == 0 ? sigma0_sq : sigma1_sq; }
  double class_prob(int c) const { return c == 0 ? p0 : p1; }

  // require_noise: callers about to evaluate the likelihood need sigma^2 > 0.
  void validate(bool require_noise = false) const;
};

}  // namespace swpdmod
