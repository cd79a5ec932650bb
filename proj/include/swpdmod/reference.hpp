#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "swpdmod/forward.hpp"
#include "swpdmod/image.hpp"
#include "swpdmod/lowrank.hpp"
#include "swpdmod/wavelet.hpp"

namespace swpdmod::ref {

// Straight-line serial implementations of the parallel kernels, written from
// the definitions with plain loops. They are the comparison points for the
// parity tests and the benchmark; keep them boring.

// Noiseless (U, Y) pair evaluated sample by sample.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> simulate_clean(const SimConfig& cfg);

WaveletCoeffs dwt2_forward(const ImageGrid& image, const WaveletBank& bank);
ImageGrid dwt2_inverse(const WaveletCoeffs& coeffs, const WaveletBank& bank);

// Normal-equations least squares (S^T D^2 S) a = S^T D y via LDLT.
Eigen::VectorXd sweep_update(const Eigen::VectorXd& y_j, const Eigen::VectorXd& rho,
                             const SweepSubspace& s_j, double rho_floor = 1e-8);

// Per-pixel classification pass over explicit row vectors.
std::pair<Eigen::VectorXd, std::vector<uint8_t>> pixel_pass(const Eigen::MatrixXd& frames,
                                                            const Eigen::MatrixXd& distortions,
                                                            const PriorConfig& prior,
                                                            bool exact_truncation = false);

Eigen::MatrixXd apply_operator(const MeasurementOperator& op, const Eigen::MatrixXd& x);
Eigen::MatrixXd apply_adjoint(const MeasurementOperator& op, const Eigen::MatrixXd& r);

}  // namespace swpdmod::ref
