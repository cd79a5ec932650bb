#include "swpdmod/lowrank.hpp"

#include <algorithm>
#include <cmath>

#include "swpdmod/rng.hpp"

namespace swpdmod {

namespace {

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, uint64_t seed) {
  Eigen::MatrixXd g(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r)
      g(r, c) = gaussian(seed, static_cast<uint64_t>(c) * rows + r);
  return g;
}

struct SvtResult {
  Eigen::MatrixXd x;
  double nuclear_norm = 0.0;
  int rank = 0;
};

SvtResult svt_exact(const Eigen::MatrixXd& x, double tau) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::ArrayXd shrunk = (svd.singularValues().array() - tau).max(0.0);
  SvtResult out;
  out.rank = static_cast<int>((shrunk > 0.0).count());
  out.nuclear_norm = shrunk.sum();
  if (out.rank == 0) {
    out.x = Eigen::MatrixXd::Zero(x.rows(), x.cols());
    return out;
  }
  out.x = svd.matrixU().leftCols(out.rank) *
          shrunk.head(out.rank).matrix().asDiagonal() *
          svd.matrixV().leftCols(out.rank).transpose();
  return out;
}

Eigen::MatrixXd thin_q(const Eigen::MatrixXd& y) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
  return qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
}

// Range-finder SVT for matrices too large for a dense SVD per step: sketch a
// subspace wide enough that its smallest captured singular value already
// falls below the threshold, so every surviving direction is in the sketch.
SvtResult svt_randomized(const Eigen::MatrixXd& g, double tau, int hint, uint64_t seed) {
  const Eigen::Index min_dim = std::min(g.rows(), g.cols());
  Eigen::Index k = std::min<Eigen::Index>(min_dim, std::max(16, hint + 8));
  uint64_t draw = 0;
  for (;;) {
    Eigen::MatrixXd omega = gaussian_matrix(g.cols(), k, substream(seed, draw++));
    Eigen::MatrixXd q = thin_q(g * omega);
    for (int power = 0; power < 2; ++power) {
      const Eigen::MatrixXd z = thin_q(g.transpose() * q);
      q = thin_q(g * z);
    }
    const Eigen::MatrixXd b = q.transpose() * g;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.singularValues()(svd.singularValues().size() - 1) <= tau || k == min_dim) {
      const Eigen::ArrayXd shrunk = (svd.singularValues().array() - tau).max(0.0);
      SvtResult out;
      out.rank = static_cast<int>((shrunk > 0.0).count());
      out.nuclear_norm = shrunk.sum();
      if (out.rank == 0) {
        out.x = Eigen::MatrixXd::Zero(g.rows(), g.cols());
      } else {
        out.x = (q * svd.matrixU().leftCols(out.rank)) *
                shrunk.head(out.rank).matrix().asDiagonal() *
                svd.matrixV().leftCols(out.rank).transpose();
      }
      return out;
    }
    k = std::min(min_dim, 2 * k);
  }
}

SvtResult svt_dispatch(const Eigen::MatrixXd& x, double tau, int hint, uint64_t seed) {
  if (x.size() <= 200000) return svt_exact(x, tau);
  return svt_randomized(x, tau, hint, seed);
}

// Largest singular value of a dense matrix by power iteration.
double matrix_two_norm(const Eigen::MatrixXd& a, uint64_t seed, int iters = 60) {
  if (a.size() == 0) return 0.0;
  Eigen::VectorXd v(a.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = gaussian(seed, i);
  double norm = v.norm();
  if (norm == 0.0) return 0.0;
  v /= norm;
  double value = 0.0;
  for (int it = 0; it < iters; ++it) {
    const Eigen::VectorXd w = a.transpose() * (a * v);
    value = w.norm();
    if (value == 0.0) return 0.0;
    v = w / value;
  }
  return std::sqrt(value);
}

struct StageResult {
  Eigen::MatrixXd x;
  double nuclear_norm = 0.0;
  int rank = 0;
  int iterations = 0;
  std::vector<double> objective_trace;
};

StageResult run_stage(const FrameStack& stack, const MeasurementOperator& op,
                      Eigen::MatrixXd x, double lambda, int iters, double step, double rel_tol,
                      uint64_t seed, int rank_hint) {
  StageResult out;
  out.rank = rank_hint;
  double prev_obj = 0.0;
  bool have_prev = false;
  for (int it = 1; it <= iters; ++it) {
    const Eigen::MatrixXd residual = apply_operator(op, x) - stack.frames;
    const Eigen::MatrixXd grad_point = x - step * apply_adjoint(op, residual);
    const SvtResult prox = svt_dispatch(grad_point, step * lambda, out.rank, substream(seed, it));
    x = prox.x;
    if (!x.allFinite())
      throw DivergenceError("nuclear-norm solve produced non-finite values at iteration " +
                            std::to_string(it));
    out.rank = prox.rank;
    out.nuclear_norm = prox.nuclear_norm;
    out.iterations = it;
    const double obj =
        0.5 * (apply_operator(op, x) - stack.frames).squaredNorm() + lambda * prox.nuclear_norm;
    out.objective_trace.push_back(obj);
    if (have_prev && std::abs(prev_obj - obj) <= rel_tol * std::max(1.0, std::abs(prev_obj)))
      break;
    prev_obj = obj;
    have_prev = true;
  }
  out.x = std::move(x);
  return out;
}

LiftedSolution finish_solution(const FrameStack& stack, const MeasurementOperator& op,
                               StageResult stage, double lambda) {
  LiftedSolution sol;
  sol.x = std::move(stage.x);
  sol.nuclear_norm = stage.nuclear_norm;
  sol.rank = stage.rank;
  sol.lambda = lambda;
  sol.iterations = stage.iterations;
  sol.objective_trace = std::move(stage.objective_trace);
  sol.residual = (apply_operator(op, sol.x) - stack.frames).norm();
  if (sol.x.squaredNorm() > 0.0) {
    auto factors = extract_factors(sol.x, &sol.factor_fallback);
    sol.beta = std::move(factors.first);
    sol.alpha = std::move(factors.second);
  } else {
    sol.beta = Eigen::VectorXd::Zero(op.k);
    sol.alpha = Eigen::VectorXd::Zero(op.total_coeffs);
  }
  return sol;
}

}  // namespace

MeasurementOperator MeasurementOperator::from_subspaces(
    const std::vector<SweepSubspace>& subspaces, Eigen::MatrixXd q_matrix) {
  if (subspaces.empty()) throw ContractError("MeasurementOperator: no subspaces");
  MeasurementOperator op;
  op.m = static_cast<int>(subspaces.size());
  op.p = static_cast<int>(subspaces.front().basis.rows());
  op.q = std::move(q_matrix);
  op.k = op.identity_q() ? op.p : static_cast<int>(op.q.cols());
  op.bases.reserve(subspaces.size());
  op.offsets.reserve(subspaces.size());
  int offset = 0;
  for (const SweepSubspace& s : subspaces) {
    op.bases.push_back(s.basis);
    op.offsets.push_back(offset);
    offset += static_cast<int>(s.basis.cols());
  }
  op.total_coeffs = offset;
  op.validate();
  return op;
}

void MeasurementOperator::validate() const {
  if (p < 1 || m < 1 || k < 1) throw ContractError("MeasurementOperator: empty operator");
  if (static_cast<int>(bases.size()) != m || static_cast<int>(offsets.size()) != m)
    throw ContractError("MeasurementOperator: per-frame structures disagree with m");
  if (!identity_q() && q.rows() != p)
    throw ContractError("MeasurementOperator: Q row count does not match the pixel grid");
  int offset = 0;
  for (int j = 0; j < m; ++j) {
    if (bases[j].rows() != p)
      throw ContractError("MeasurementOperator: basis " + std::to_string(j) +
                          " row count does not match the pixel grid");
    if (bases[j].cols() < 1)
      throw ContractError("MeasurementOperator: basis " + std::to_string(j) + " is empty");
    if (offsets[j] != offset)
      throw ContractError("MeasurementOperator: block offsets are inconsistent");
    offset += static_cast<int>(bases[j].cols());
  }
  if (offset != total_coeffs)
    throw ContractError("MeasurementOperator: total coefficient count is inconsistent");
}

Eigen::MatrixXd apply_operator(const MeasurementOperator& op, const Eigen::MatrixXd& x) {
  if (x.rows() != op.k || x.cols() != op.total_coeffs)
    throw ContractError("apply_operator: X must be K x (sum N_j)");
  Eigen::MatrixXd out(op.p, op.m);
#pragma omp parallel for schedule(dynamic)
  for (int j = 0; j < op.m; ++j) {
    const auto x_j = x.middleCols(op.offsets[j], op.bases[j].cols());
    if (op.identity_q()) {
      out.col(j) = (x_j.array() * op.bases[j].array()).rowwise().sum();
    } else {
      const Eigen::MatrixXd w_j = op.q * x_j;
      out.col(j) = (w_j.array() * op.bases[j].array()).rowwise().sum();
    }
  }
  return out;
}

Eigen::MatrixXd apply_adjoint(const MeasurementOperator& op, const Eigen::MatrixXd& r) {
  if (r.rows() != op.p || r.cols() != op.m)
    throw ContractError("apply_adjoint: R must be P x M");
  Eigen::MatrixXd out(op.k, op.total_coeffs);
#pragma omp parallel for schedule(dynamic)
  for (int j = 0; j < op.m; ++j) {
    const Eigen::MatrixXd block = r.col(j).asDiagonal() * op.bases[j];
    if (op.identity_q()) {
      out.middleCols(op.offsets[j], op.bases[j].cols()) = block;
    } else {
      out.middleCols(op.offsets[j], op.bases[j].cols()) = op.q.transpose() * block;
    }
  }
  return out;
}

double operator_norm(const MeasurementOperator& op, int iters, uint64_t seed) {
  op.validate();
  Eigen::MatrixXd v = gaussian_matrix(op.k, op.total_coeffs, substream(seed, 0xA0AAull));
  double norm = v.norm();
  if (norm == 0.0) return 0.0;
  v /= norm;
  double value = 0.0;
  for (int it = 0; it < iters; ++it) {
    const Eigen::MatrixXd w = apply_adjoint(op, apply_operator(op, v));
    value = w.norm();
    if (value == 0.0) return 0.0;
    v = w / value;
  }
  return std::sqrt(value);
}

Eigen::MatrixXd svt(const Eigen::MatrixXd& x, double tau) {
  if (!(tau >= 0.0)) throw ContractError("svt: threshold must be >= 0");
  if (tau == 0.0) return x;
  return svt_exact(x, tau).x;
}

void NuclearOptions::validate() const {
  if (!(lambda >= 0.0)) throw ContractError("NuclearOptions: lambda must be >= 0");
  if (iters < 1) throw ContractError("NuclearOptions: iters must be >= 1");
  if (stages < 1) throw ContractError("NuclearOptions: stages must be >= 1");
  if (!(stage_factor > 0.0 && stage_factor < 1.0))
    throw ContractError("NuclearOptions: stage_factor must lie in (0,1)");
  if (!(rel_tol >= 0.0)) throw ContractError("NuclearOptions: rel_tol must be >= 0");
}

LiftedSolution solve_nuclear(const FrameStack& stack, const MeasurementOperator& op,
                             double lambda, int iters, uint64_t seed) {
  op.validate();
  stack.validate();
  if (stack.frames.rows() != op.p || stack.frame_count() != op.m)
    throw ContractError("solve_nuclear: stack dimensions do not match the operator");
  if (!(lambda > 0.0)) throw ContractError("solve_nuclear: lambda must be > 0");
  if (iters < 1) throw ContractError("solve_nuclear: iters must be >= 1");

  const double op_norm = operator_norm(op, 50, seed);
  if (op_norm == 0.0) throw DomainError("solve_nuclear: operator is identically zero");
  const double step = 1.0 / (1.05 * op_norm * op_norm);
  Eigen::MatrixXd x0 = Eigen::MatrixXd::Zero(op.k, op.total_coeffs);
  StageResult stage =
      run_stage(stack, op, std::move(x0), lambda, iters, step, 0.0, substream(seed, 0x57461ull), 0);
  return finish_solution(stack, op, std::move(stage), lambda);
}

LiftedSolution solve_nuclear_path(const FrameStack& stack, const MeasurementOperator& op,
                                  const NuclearOptions& opts) {
  op.validate();
  opts.validate();
  stack.validate();
  if (stack.frames.rows() != op.p || stack.frame_count() != op.m)
    throw ContractError("solve_nuclear_path: stack dimensions do not match the operator");

  double lambda_final = opts.lambda;
  if (lambda_final == 0.0) {
    const Eigen::MatrixXd back_projection = apply_adjoint(op, stack.frames);
    lambda_final = 1e-4 * matrix_two_norm(back_projection, substream(opts.seed, 0x2A0ull));
    if (!(lambda_final > 0.0))
      throw DomainError("solve_nuclear_path: cannot pick lambda for an all-zero stack");
  }

  const double op_norm = operator_norm(op, 50, opts.seed);
  if (op_norm == 0.0) throw DomainError("solve_nuclear_path: operator is identically zero");
  const double step = 1.0 / (1.05 * op_norm * op_norm);

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(op.k, op.total_coeffs);
  StageResult stage;
  int rank_hint = 0;
  int total_iters = 0;
  for (int s = opts.stages - 1; s >= 0; --s) {
    const double lambda = lambda_final / std::pow(opts.stage_factor, s);
    stage = run_stage(stack, op, std::move(x), lambda, opts.iters, step, opts.rel_tol,
                      substream(opts.seed, 0x57460ull + s), rank_hint);
    x = std::move(stage.x);
    rank_hint = stage.rank;
    total_iters += stage.iterations;
  }
  stage.x = std::move(x);
  stage.iterations = total_iters;
  return finish_solution(stack, op, std::move(stage), lambda_final);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> extract_factors(const Eigen::MatrixXd& x,
                                                            bool* used_svd_fallback) {
  if (x.size() == 0 || x.squaredNorm() == 0.0)
    throw DomainError("extract_factors: zero matrix has no factorization");
  if (used_svd_fallback) *used_svd_fallback = false;
  if (std::abs(x(0, 0)) >= 1e-12) {
    Eigen::VectorXd beta = x.col(0);
    Eigen::VectorXd alpha = x.row(0).transpose() / x(0, 0);
    return {std::move(beta), std::move(alpha)};
  }
  if (used_svd_fallback) *used_svd_fallback = true;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double s0 = svd.singularValues()(0);
  Eigen::VectorXd beta = svd.matrixU().col(0) * s0;
  Eigen::VectorXd alpha = svd.matrixV().col(0);
  return {std::move(beta), std::move(alpha)};
}

}  // namespace swpdmod
