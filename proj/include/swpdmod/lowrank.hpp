#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "swpdmod/errors.hpp"
#include "swpdmod/image.hpp"
#include "swpdmod/wavelet.hpp"

namespace swpdmod {

// Lifted measurement A(X)_{ij} = Q_{i,:} X P_j^T (S^j_{i,:})^T, applied
// blockwise so the P*M rank-one measurement matrices never materialize.
struct MeasurementOperator {
  Eigen::MatrixXd q;                    // P x K image subspace; empty = identity (K = P)
  std::vector<Eigen::MatrixXd> bases;   // per-frame S_j, each P x N_j
  std::vector<int> offsets;             // column offset of block j inside X
  int p = 0;
  int m = 0;
  int k = 0;
  int total_coeffs = 0;

  static MeasurementOperator from_subspaces(const std::vector<SweepSubspace>& subspaces,
                                            Eigen::MatrixXd q_matrix = {});
  bool identity_q() const { return q.size() == 0; }
  void validate() const;
};

Eigen::MatrixXd apply_operator(const MeasurementOperator& op, const Eigen::MatrixXd& x);
Eigen::MatrixXd apply_adjoint(const MeasurementOperator& op, const Eigen::MatrixXd& r);

// Power-method estimate of ||A||_op (50 iterations, fixed seed).
double operator_norm(const MeasurementOperator& op, int iters = 50, uint64_t seed = 1);

// Proximal map of tau * nuclear norm: soft-threshold the singular values.
Eigen::MatrixXd svt(const Eigen::MatrixXd& x, double tau);

struct NuclearOptions {
  double lambda = 0.0;        // 0 = auto: 1e-4 * ||A*(Y)||_2 as the final stage
  int iters = 100;            // per continuation stage
  int stages = 10;
  double stage_factor = 0.5;  // geometric lambda decrease between stages
  double rel_tol = 1e-6;      // early stop on relative objective change
  uint64_t seed = 1;
  void validate() const;
};

struct LiftedSolution {
  Eigen::MatrixXd x;       // K x (sum N_j)
  Eigen::VectorXd beta;    // image coefficients
  Eigen::VectorXd alpha;   // stacked distortion coefficients
  double residual = 0.0;   // ||Y - A(X)||_F
  double nuclear_norm = 0.0;
  double lambda = 0.0;     // final-stage value actually used
  int rank = 0;
  int iterations = 0;      // across all stages
  bool factor_fallback = false;  // extract_factors used the singular-pair rule
  std::vector<double> objective_trace;  // final stage only
};

// Proximal gradient on 0.5||Y - A(X)||_F^2 + lambda||X||_*, step 1/(1.05 L^2).
LiftedSolution solve_nuclear(const FrameStack& stack, const MeasurementOperator& op,
                             double lambda, int iters, uint64_t seed = 1);

// Geometric lambda continuation with warm starts; the last stage runs at
// opts.lambda (or the auto value).
LiftedSolution solve_nuclear_path(const FrameStack& stack, const MeasurementOperator& op,
                                  const NuclearOptions& opts = {});

// beta = X_{:,1}, alpha^T = X_{1,:} / X_{1,1}; leading singular pair when the
// pivot is numerically zero (reported through used_svd_fallback).
std::pair<Eigen::VectorXd, Eigen::VectorXd> extract_factors(const Eigen::MatrixXd& x,
                                                            bool* used_svd_fallback = nullptr);

}  // namespace swpdmod
