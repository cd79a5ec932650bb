#include "swpdmod/altmin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "swpdmod/io.hpp"

namespace swpdmod {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Mass a truncated normal N(mean, var) keeps on the positive half line.
double log_positive_mass(double mean, double sigma) {
  return std::log(0.5 * std::erfc(-mean / (sigma * std::numbers::sqrt2)));
}

double class_log_const(const PriorConfig& prior, int c, bool exact_truncation) {
  const double sigma = std::sqrt(prior.class_var(c));
  double v = std::log(sigma / prior.class_prob(c));
  if (exact_truncation) v += log_positive_mass(prior.class_mean(c), sigma);
  return v;
}

void check_rows(const Eigen::VectorXd& y_row, const Eigen::VectorXd& u_row) {
  if (y_row.size() != u_row.size())
    throw ContractError("pixel update: y_row and u_row lengths disagree");
}

// Candidate value from the precomputed per-pixel sums.
double candidate_from_sums(double syu, double su2, const PriorConfig& prior, int class_c) {
  const double sig_sq = prior.noise_sigma_sq;
  const double var_c = prior.class_var(class_c);
  const double w = (sig_sq * prior.class_mean(class_c) + var_c * syu) / (sig_sq + var_c * su2);
  return std::max(w, 0.0);
}

// g with the common sum_j y^2 term dropped; ordering and ties are unaffected
// because the dropped term is class independent.
double reduced_cost(double w, double syu, double su2, const PriorConfig& prior, int class_c,
                    bool exact_truncation) {
  const double d = w - prior.class_mean(class_c);
  return class_log_const(prior, class_c, exact_truncation) +
         d * d / (2.0 * prior.class_var(class_c)) +
         (w * w * su2 - 2.0 * w * syu) / (2.0 * prior.noise_sigma_sq);
}

}  // namespace

void SolverOptions::validate() const {
  if (max_iters < 1) throw ContractError("SolverOptions: max_iters must be >= 1");
  if (!(rel_tol > 0.0)) throw ContractError("SolverOptions: rel_tol must be > 0");
  if (!(rho_floor >= 0.0)) throw ContractError("SolverOptions: rho_floor must be >= 0");
  if (!std::isfinite(init_value) || init_value < 0.0)
    throw ContractError("SolverOptions: init_value must be finite and >= 0");
}

Eigen::VectorXd sweep_update(const Eigen::VectorXd& y_j, const Eigen::VectorXd& rho,
                             const SweepSubspace& s_j, double rho_floor, bool* rank_deficient) {
  const Eigen::Index p = s_j.basis.rows();
  const Eigen::Index n = s_j.basis.cols();
  if (y_j.size() != p || rho.size() != p)
    throw ContractError("sweep_update: frame/image/basis dimensions disagree");
  if (n < 1) throw ContractError("sweep_update: empty subspace");

  const Eigen::ArrayXd clamped = rho.array().max(rho_floor);
  const Eigen::MatrixXd scaled = clamped.matrix().asDiagonal() * s_j.basis;

  // Unpivoted QR is the fast path; the clamped diagonal keeps the matrix
  // full rank in ordinary runs. A collapsing R diagonal hands the problem to
  // a rank-revealing solve that returns the minimum-norm solution.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(scaled);
  const Eigen::VectorXd r_diag = qr.matrixQR().diagonal().head(n);
  const double max_diag = r_diag.cwiseAbs().maxCoeff();
  const double min_diag = r_diag.cwiseAbs().minCoeff();
  if (min_diag > max_diag * 1e-13) return qr.solve(y_j);

  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(scaled);
  if (rank_deficient && cod.rank() < n) *rank_deficient = true;
  return cod.solve(y_j);
}

double map_pixel_update(int i, const Eigen::VectorXd& y_row, const Eigen::VectorXd& u_row,
                        const PriorConfig& prior, int class_c) {
  if (class_c != 0 && class_c != 1)
    throw ContractError("map_pixel_update: class must be 0 or 1 (pixel " + std::to_string(i) +
                        ")");
  check_rows(y_row, u_row);
  prior.validate(true);
  return candidate_from_sums(y_row.dot(u_row), u_row.squaredNorm(), prior, class_c);
}

double pixel_cost(double rho_i, int class_c, const Eigen::VectorXd& y_row,
                  const Eigen::VectorXd& u_row, const PriorConfig& prior, bool exact_truncation) {
  if (class_c != 0 && class_c != 1) throw ContractError("pixel_cost: class must be 0 or 1");
  check_rows(y_row, u_row);
  prior.validate(true);
  if (rho_i < 0.0) return kInf;
  const double d = rho_i - prior.class_mean(class_c);
  return class_log_const(prior, class_c, exact_truncation) +
         d * d / (2.0 * prior.class_var(class_c)) +
         (y_row - rho_i * u_row).squaredNorm() / (2.0 * prior.noise_sigma_sq);
}

std::pair<double, uint8_t> classify_pixel(double w0, double w1, const Eigen::VectorXd& y_row,
                                          const Eigen::VectorXd& u_row, const PriorConfig& prior,
                                          bool exact_truncation) {
  if (w0 < 0.0 || w1 < 0.0) throw ContractError("classify_pixel: candidates must be >= 0");
  const double g0 = pixel_cost(w0, 0, y_row, u_row, prior, exact_truncation);
  const double g1 = pixel_cost(w1, 1, y_row, u_row, prior, exact_truncation);
  if (g0 <= g1) return {w0, 0};
  return {w1, 1};
}

double total_objective(const SolverState& state, const FrameStack& stack,
                       const PriorConfig& prior, bool exact_truncation) {
  const Eigen::Index p = stack.frames.rows();
  if (state.rho.size() != p || static_cast<Eigen::Index>(state.labels.size()) != p ||
      state.distortions.rows() != p || state.distortions.cols() != stack.frames.cols())
    throw ContractError("total_objective: state does not match the stack");
  prior.validate(true);

  double j_val = 0.0;
  for (Eigen::Index i = 0; i < p; ++i) {
    const int c = state.labels[i];
    const double d = state.rho[i] - prior.class_mean(c);
    j_val += class_log_const(prior, c, exact_truncation) + d * d / (2.0 * prior.class_var(c));
  }
  const Eigen::MatrixXd residual =
      stack.frames - (state.distortions.array().colwise() * state.rho.array()).matrix();
  return j_val + residual.squaredNorm() / (2.0 * prior.noise_sigma_sq);
}

SolverState solve(const FrameStack& stack, const std::vector<SweepSubspace>& subspaces,
                  const PriorConfig& prior, const SolverOptions& opts) {
  stack.validate();
  opts.validate();
  prior.validate(true);
  const Eigen::Index p = stack.frames.rows();
  const int m = stack.frame_count();
  if (static_cast<int>(subspaces.size()) != m)
    throw ContractError("solve: expected one subspace per frame, got " +
                        std::to_string(subspaces.size()) + " for " + std::to_string(m) +
                        " frames");
  for (const SweepSubspace& s : subspaces)
    if (s.basis.rows() != p) throw ContractError("solve: subspace row count does not match stack");

  SolverState state;
  state.rho = Eigen::VectorXd::Constant(p, opts.init_value);
  state.labels.assign(static_cast<size_t>(p), 0);
  state.alphas.resize(m);
  state.distortions.resize(p, m);

  const bool exact = opts.exact_truncation_constants;
  Eigen::VectorXd rho_next(p);

  for (int iter = 1; iter <= opts.max_iters; ++iter) {
    std::vector<uint8_t> deficient(m, 0);
#pragma omp parallel for schedule(dynamic)
    for (int j = 0; j < m; ++j) {
      bool flag = false;
      state.alphas[j] =
          sweep_update(stack.frames.col(j), state.rho, subspaces[j], opts.rho_floor, &flag);
      state.distortions.col(j) = subspaces[j].basis * state.alphas[j];
      deficient[j] = flag ? 1 : 0;
    }
    for (int j = 0; j < m; ++j)
      if (deficient[j]) state.rank_deficient = true;

    const Eigen::VectorXd syu =
        (stack.frames.array() * state.distortions.array()).rowwise().sum();
    const Eigen::VectorXd su2 = state.distortions.array().square().rowwise().sum();

#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < p; ++i) {
      const double w0 = candidate_from_sums(syu[i], su2[i], prior, 0);
      const double w1 = candidate_from_sums(syu[i], su2[i], prior, 1);
      const double g0 = reduced_cost(w0, syu[i], su2[i], prior, 0, exact);
      const double g1 = reduced_cost(w1, syu[i], su2[i], prior, 1, exact);
      if (g0 <= g1) {
        rho_next[i] = w0;
        state.labels[i] = 0;
      } else {
        rho_next[i] = w1;
        state.labels[i] = 1;
      }
    }

    const double denom = std::max(state.rho.norm(), 1e-30);
    const double rel = (rho_next - state.rho).norm() / denom;
    state.rho.swap(rho_next);
    state.iterations = iter;

    const double j_val = total_objective(state, stack, prior, exact);
    if (!std::isfinite(j_val) || !state.rho.allFinite())
      throw DivergenceError("alternating solve produced non-finite values at iteration " +
                            std::to_string(iter));
    state.objective_trace.push_back(j_val);
    state.rel_change_trace.push_back(rel);

    if (rel < opts.rel_tol) {
      state.converged = true;
      break;
    }
  }
  return state;
}

double estimate_noise_sigma_sq(const FrameStack& stack) {
  stack.validate();
  const WaveletBank bank = WaveletBank::make("symlet4", 1);
  const ImageGrid frame0(stack.shape, stack.frames.col(0));
  const WaveletCoeffs coeffs = dwt2_forward(frame0, bank);

  // Detail bands of the single-level transform: everything outside the
  // top-left approximation quadrant.
  std::vector<double> details;
  details.reserve(static_cast<size_t>(coeffs.data.size() * 3 / 4));
  const int half_w = coeffs.padded_width / 2;
  const int half_h = coeffs.padded_height / 2;
  for (int r = 0; r < coeffs.padded_height; ++r)
    for (int c = 0; c < coeffs.padded_width; ++c)
      if (r >= half_h || c >= half_w) details.push_back(coeffs.data[r * coeffs.padded_width + c]);

  auto median_of = [](std::vector<double>& v) {
    const size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (v.size() % 2 == 0) {
      std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
      return 0.5 * (hi + v[mid - 1]);
    }
    return hi;
  };

  const double center = median_of(details);
  for (double& d : details) d = std::abs(d - center);
  const double sigma = 1.4826 * median_of(details);
  return sigma * sigma;
}

double noise_floor_sigma_sq(const FrameStack& stack) {
  const double power =
      stack.frames.squaredNorm() / (static_cast<double>(stack.frames.rows()) * stack.frame_count());
  if (!(power > 0.0))
    throw DomainError("noise floor undefined: the frame stack is identically zero");
  return 1e-6 * power;
}

double resolve_noise_sigma_sq(const PriorConfig& prior, const FrameStack& stack,
                              const std::map<std::string, std::string>& stack_meta) {
  if (prior.noise_sigma_sq > 0.0) return prior.noise_sigma_sq;
  auto it = stack_meta.find("noise_sigma_sq");
  if (it != stack_meta.end()) {
    double recorded = 0.0;
    try {
      size_t pos = 0;
      recorded = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw FormatError("stack metadata: malformed noise_sigma_sq '" + it->second + "'");
    }
    if (recorded > 0.0) return recorded;
    // Recorded zero means an explicitly noiseless simulation; a tiny floor
    // keeps the likelihood weights finite without drowning the data term.
    return noise_floor_sigma_sq(stack);
  }
  const double estimated = estimate_noise_sigma_sq(stack);
  if (estimated > 0.0) return estimated;
  return noise_floor_sigma_sq(stack);
}

PriorConfig parse_prior_config(KeyValueConfig& kv) {
  PriorConfig prior;
  prior.rho0 = kv.get_double("rho0", prior.rho0);
  prior.rho1 = kv.get_double("rho1", prior.rho1);
  prior.sigma0_sq = kv.get_double("sigma0_sq", prior.sigma0_sq);
  prior.sigma1_sq = kv.get_double("sigma1_sq", prior.sigma1_sq);
  prior.p0 = kv.get_double("p0", prior.p0);
  prior.p1 = kv.get_double("p1", 1.0 - prior.p0);
  prior.noise_sigma_sq = kv.get_double("noise_sigma_sq", prior.noise_sigma_sq);
  try {
    prior.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid prior configuration: ") + e.what());
  }
  return prior;
}

SolverOptions parse_solver_options(KeyValueConfig& kv) {
  SolverOptions opts;
  opts.max_iters = kv.get_int("max_iters", opts.max_iters);
  opts.rel_tol = kv.get_double("rel_tol", opts.rel_tol);
  opts.rho_floor = kv.get_double("rho_floor", opts.rho_floor);
  opts.exact_truncation_constants =
      kv.get_bool("exact_truncation_constants", opts.exact_truncation_constants);
  opts.init_value = kv.get_double("init_value", opts.init_value);
  try {
    opts.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid solver options: ") + e.what());
  }
  return opts;
}

void write_solver_outputs(const SolverState& state, const GridShape& shape,
                          const std::filesystem::path& dir) {
  if (state.rho.size() != shape.pixels())
    throw ContractError("write_solver_outputs: state does not match the grid");
  std::filesystem::create_directories(dir);

  write_raw_matrix(dir / "rho.raw", shape, state.rho);
  write_pgm16(dir / "rho.pgm", shape, state.rho);

  Eigen::VectorXd labels(state.rho.size());
  for (Eigen::Index i = 0; i < labels.size(); ++i) labels[i] = state.labels[i];
  write_raw_matrix(dir / "labels.raw", shape, labels);
  write_pgm16(dir / "labels.pgm", shape, labels);

  write_raw_matrix(dir / "distortions.raw", shape, state.distortions);

  std::ostringstream csv;
  csv << "iteration,objective,rel_change\n";
  for (size_t k = 0; k < state.objective_trace.size(); ++k)
    csv << (k + 1) << ',' << format_double(state.objective_trace[k]) << ','
        << format_double(state.rel_change_trace[k]) << '\n';
  atomic_write_text(dir / "trace.csv", csv.str());
}

}  // namespace swpdmod
