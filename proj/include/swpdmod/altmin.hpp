#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <vector>

#include "swpdmod/config.hpp"
#include "swpdmod/errors.hpp"
#include "swpdmod/image.hpp"
#include "swpdmod/wavelet.hpp"

namespace swpdmod {

struct SolverOptions {
  int max_iters = 50;
  double rel_tol = 1e-6;     // on relative rho change between iterations
  double rho_floor = 1e-8;   // clamp for the LS diagonal only; reported rho untouched
  bool exact_truncation_constants = false;  // add per-class log Phi normalizers to g
  double init_value = 1.0;
  void validate() const;
};

struct SolverState {
  Eigen::VectorXd rho;
  std::vector<uint8_t> labels;
  std::vector<Eigen::VectorXd> alphas;
  Eigen::MatrixXd distortions;  // column j = S_j * alpha_j, never stale
  int iterations = 0;
  bool converged = false;
  bool rank_deficient = false;  // any sweep LS fell back to a minimum-norm solve
  std::vector<double> objective_trace;   // J after each full alternation
  std::vector<double> rel_change_trace;  // matching relative rho change
};

// alpha_j = (diag(max(rho, floor)) S_j)^+ y_j. Rank deficiency switches to a
// minimum-norm solve and sets *rank_deficient.
Eigen::VectorXd sweep_update(const Eigen::VectorXd& y_j, const Eigen::VectorXd& rho,
                             const SweepSubspace& s_j, double rho_floor = 1e-8,
                             bool* rank_deficient = nullptr);

// Closed-form truncated-normal MAP candidate for one pixel under class c:
// w_c = max((sigma^2 rho_c + sigma_c^2 sum_j y u) / (sigma^2 + sigma_c^2 sum_j u^2), 0).
double map_pixel_update(int i, const Eigen::VectorXd& y_row, const Eigen::VectorXd& u_row,
                        const PriorConfig& prior, int class_c);

// g(rho_i, c) = log(sigma_c / p_c) + (rho_i - rho_c)^2 / (2 sigma_c^2)
//             + sum_j (y - rho_i u)^2 / (2 sigma^2); +inf for rho_i < 0.
// exact_truncation adds log Phi(rho_c / sigma_c), the positive-half-line mass.
double pixel_cost(double rho_i, int class_c, const Eigen::VectorXd& y_row,
                  const Eigen::VectorXd& u_row, const PriorConfig& prior,
                  bool exact_truncation = false);

// Binary comparison g(w0,0) <= g(w1,1); ties pick class 0.
std::pair<double, uint8_t> classify_pixel(double w0, double w1, const Eigen::VectorXd& y_row,
                                          const Eigen::VectorXd& u_row, const PriorConfig& prior,
                                          bool exact_truncation = false);

double total_objective(const SolverState& state, const FrameStack& stack,
                       const PriorConfig& prior, bool exact_truncation = false);

SolverState solve(const FrameStack& stack, const std::vector<SweepSubspace>& subspaces,
                  const PriorConfig& prior, const SolverOptions& opts = {});

// MAD of the finest-scale wavelet coefficients of frame 0, scaled to a
// Gaussian sigma and squared. Heuristic for measured data without a recorded
// noise level.
double estimate_noise_sigma_sq(const FrameStack& stack);

// 1e-6 times the mean squared sample: keeps the MAP weights finite on
// noiseless stacks without drowning the data term.
double noise_floor_sigma_sq(const FrameStack& stack);

// Priority: explicit prior value, then stored stack metadata, then the MAD
// estimate; zeros fall through to the floor.
double resolve_noise_sigma_sq(const PriorConfig& prior, const FrameStack& stack,
                              const std::map<std::string, std::string>& stack_meta);

PriorConfig parse_prior_config(KeyValueConfig& kv);
SolverOptions parse_solver_options(KeyValueConfig& kv);

// rho image (PGM + raw), labels, distortion stack, trace CSV.
void write_solver_outputs(const SolverState& state, const GridShape& shape,
                          const std::filesystem::path& dir);

}  // namespace swpdmod
