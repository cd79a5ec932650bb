#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <unistd.h>

#include "swpdmod/altmin.hpp"
#include "swpdmod/errors.hpp"
#include "swpdmod/forward.hpp"
#include "swpdmod/io.hpp"
#include "swpdmod/reference.hpp"
#include "swpdmod/rng.hpp"

using namespace swpdmod;
namespace fs = std::filesystem;

namespace {

fs::path make_temp_dir() {
  static int counter = 0;
  const fs::path dir =
      fs::temp_directory_path() / ("swpdmod_altmin_test_" + std::to_string(::getpid()) + "_" +
                                   std::to_string(counter++));
  fs::create_directories(dir);
  return dir;
}

PriorConfig basic_prior() {
  PriorConfig prior;
  prior.rho0 = 0.3;
  prior.rho1 = 0.1;
  prior.sigma0_sq = 0.01;
  prior.sigma1_sq = 0.01;
  prior.noise_sigma_sq = 0.01;
  return prior;
}

// Golden-section minimizer over [lo, hi]; independent check of the
// closed-form pixel update.
double golden_minimize(const std::function<double(double)>& f, double lo, double hi) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > 1e-12) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// Oracle subspaces straight from the simulated distortions.
std::vector<SweepSubspace> oracle_subspaces(const Eigen::MatrixXd& distortions) {
  std::vector<SweepSubspace> subs;
  for (int j = 0; j < distortions.cols(); ++j) subs.push_back(oracle_subspace(distortions, j));
  return subs;
}

}  // namespace

TEST_CASE("pixel update matches the worked one-frame example") {
  PriorConfig prior = basic_prior();
  prior.rho1 = 0.1;  // class 1 mean
  Eigen::VectorXd y(1), u(1);
  y << 0.3;
  u << 1.0;
  // w = (0.01 * 0.1 + 0.01 * 0.3) / (0.01 + 0.01) = 0.2
  CHECK(map_pixel_update(0, y, u, prior, 1) == doctest::Approx(0.2).epsilon(1e-14));
}

TEST_CASE("pixel update limits behave") {
  PriorConfig prior = basic_prior();
  Eigen::VectorXd y(2), u(2);
  y << 0.5, 0.2;
  u << 1.0, 0.7;

  SUBCASE("a vanishing class variance pins the update to the class mean") {
    prior.sigma0_sq = 1e-30;
    CHECK(map_pixel_update(0, y, u, prior, 0) == doctest::Approx(0.3).epsilon(1e-10));
  }
  SUBCASE("a negative unconstrained optimum truncates to zero") {
    prior.sigma0_sq = 10.0;
    Eigen::VectorXd y_neg = -10.0 * y;
    CHECK(map_pixel_update(0, y_neg, u, prior, 0) == 0.0);
  }
  SUBCASE("bad class index is rejected") {
    CHECK_THROWS_AS(map_pixel_update(0, y, u, prior, 2), ContractError);
  }
  SUBCASE("mismatched rows are rejected") {
    Eigen::VectorXd short_u(1);
    short_u << 1.0;
    CHECK_THROWS_AS(map_pixel_update(0, y, short_u, prior, 0), ContractError);
  }
}

TEST_CASE("pixel cost penalizes the negative half-line and splits symmetrically") {
  PriorConfig prior = basic_prior();
  prior.rho0 = 0.2;
  prior.rho1 = 0.3;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(2);

  CHECK(pixel_cost(-1e-9, 0, y, u, prior) == std::numeric_limits<double>::infinity());
  // 0.25 sits exactly between the class means; equal variances and priors
  // make the two costs identical.
  CHECK(pixel_cost(0.25, 0, y, u, prior) == doctest::Approx(pixel_cost(0.25, 1, y, u, prior)));

  // Empty frame set: pure prior term.
  Eigen::VectorXd empty(0);
  const double expected = std::log(std::sqrt(prior.sigma0_sq) / prior.p0) +
                          (0.25 - 0.2) * (0.25 - 0.2) / (2.0 * prior.sigma0_sq);
  CHECK(pixel_cost(0.25, 0, empty, empty, prior) == doctest::Approx(expected).epsilon(1e-14));

  // The exact-truncation variant adds log Phi(rho_c / sigma_c) per class.
  // Phi(x) = 0.5 erfc(-x / sqrt 2) gives an independent value for the shift;
  // it is negative (mass below 1) and differs between the classes here
  // (rho0/sigma0 = 2 vs rho1/sigma1 = 3), so the symmetric tie breaks.
  const double shift0 = std::log(0.5 * std::erfc(-2.0 / std::sqrt(2.0)));
  const double shift1 = std::log(0.5 * std::erfc(-3.0 / std::sqrt(2.0)));
  CHECK(pixel_cost(0.25, 0, y, u, prior, true) ==
        doctest::Approx(pixel_cost(0.25, 0, y, u, prior) + shift0).epsilon(1e-12));
  CHECK(pixel_cost(0.25, 1, y, u, prior, true) ==
        doctest::Approx(pixel_cost(0.25, 1, y, u, prior) + shift1).epsilon(1e-12));
  CHECK(pixel_cost(0.25, 0, y, u, prior, true) < pixel_cost(0.25, 0, y, u, prior));
  CHECK(pixel_cost(0.25, 0, y, u, prior, true) < pixel_cost(0.25, 1, y, u, prior, true));
}

TEST_CASE("closed-form update minimizes the pixel cost") {
  for (int trial = 0; trial < 25; ++trial) {
    const uint64_t seed = 5000 + trial;
    PriorConfig prior = basic_prior();
    prior.noise_sigma_sq = 0.001 + uniform01(seed, 0) * 0.05;
    prior.sigma0_sq = 0.001 + uniform01(seed, 1) * 0.1;
    const int m = 1 + static_cast<int>(uniform_below(seed, 2, 6));
    Eigen::VectorXd y(m), u(m);
    for (int j = 0; j < m; ++j) {
      u[j] = gaussian(seed, 10 + 2 * j);
      y[j] = 0.3 * u[j] + 0.1 * gaussian(seed, 11 + 2 * j);
    }
    const double w = map_pixel_update(0, y, u, prior, 0);
    const double w_gs = golden_minimize(
        [&](double r) { return pixel_cost(r, 0, y, u, prior); }, 0.0, 5.0);
    CHECK(std::abs(w - w_gs) <= 1e-8);
  }
}

TEST_CASE("classification picks the cheaper class and breaks ties low") {
  PriorConfig prior = basic_prior();
  prior.rho0 = 0.2;
  prior.rho1 = 0.4;
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);

  SUBCASE("exact tie goes to class 0") {
    const auto [w, label] = classify_pixel(prior.rho0, prior.rho1, zero, zero, prior);
    CHECK(label == 0);
    CHECK(w == prior.rho0);
  }
  SUBCASE("an overwhelming class-1 prior flips the call") {
    prior.p0 = 1e-9;
    prior.p1 = 1.0 - 1e-9;
    const auto [w, label] = classify_pixel(prior.rho0, prior.rho1, zero, zero, prior);
    CHECK(label == 1);
    CHECK(w == prior.rho1);
  }
  SUBCASE("noiseless class-1 data wins against the prior") {
    prior = basic_prior();
    prior.sigma0_sq = prior.sigma1_sq = 1e-10;
    prior.noise_sigma_sq = 1e-8;
    Eigen::VectorXd u(4);
    u << 1.0, 0.5, -0.25, 0.75;
    const Eigen::VectorXd y = 0.1 * u;
    const double w0 = map_pixel_update(0, y, u, prior, 0);
    const double w1 = map_pixel_update(0, y, u, prior, 1);
    const auto [w, label] = classify_pixel(w0, w1, y, u, prior);
    CHECK(label == 1);
    CHECK(w == doctest::Approx(0.1).epsilon(1e-4));
  }
  SUBCASE("negative candidates are rejected") {
    CHECK_THROWS_AS(classify_pixel(-0.1, 0.1, zero, zero, prior), ContractError);
  }
}

TEST_CASE("sweep update solves the weighted least squares problem") {
  // Orthonormal basis on a 64-pixel grid.
  FrameStack stack;
  stack.shape = GridShape{8, 8, 1e-4, 1e-4};
  stack.frames.resize(64, 1);
  for (int i = 0; i < 64; ++i) stack.frames(i, 0) = gaussian(400, static_cast<uint64_t>(i));
  const auto subs = build_subspaces(stack, 10);
  const SweepSubspace& s = subs[0];

  SUBCASE("unit reflectance reduces to an orthogonal projection") {
    const Eigen::VectorXd rho = Eigen::VectorXd::Ones(64);
    const Eigen::VectorXd alpha = sweep_update(stack.frames.col(0), rho, s);
    const Eigen::VectorXd expected = s.basis.transpose() * stack.frames.col(0);
    CHECK((alpha - expected).norm() <= 1e-12 * expected.norm());
  }
  SUBCASE("consistent data is recovered exactly") {
    Eigen::VectorXd rho(64), alpha_true(10);
    for (int i = 0; i < 64; ++i) rho[i] = 0.5 + uniform01(401, static_cast<uint64_t>(i));
    for (int k = 0; k < 10; ++k) alpha_true[k] = gaussian(402, static_cast<uint64_t>(k));
    const Eigen::VectorXd y = rho.asDiagonal() * (s.basis * alpha_true);
    const Eigen::VectorXd alpha = sweep_update(y, rho, s);
    CHECK((alpha - alpha_true).norm() <= 1e-10 * alpha_true.norm());
  }
  SUBCASE("the QR path agrees with a normal-equations solve") {
    Eigen::VectorXd rho(64), y(64);
    for (int i = 0; i < 64; ++i) {
      rho[i] = 0.2 + uniform01(403, static_cast<uint64_t>(i));
      y[i] = gaussian(404, static_cast<uint64_t>(i));
    }
    const Eigen::VectorXd fast = sweep_update(y, rho, s);
    const Eigen::VectorXd slow = ref::sweep_update(y, rho, s);
    CHECK((fast - slow).norm() <= 1e-8 * std::max(1.0, slow.norm()));
  }
  SUBCASE("duplicate columns trigger the minimum-norm fallback") {
    SweepSubspace degenerate = s;
    degenerate.basis.conservativeResize(64, 2);
    degenerate.basis.col(1) = degenerate.basis.col(0);
    bool flag = false;
    const Eigen::VectorXd rho = Eigen::VectorXd::Ones(64);
    const Eigen::VectorXd alpha =
        sweep_update(stack.frames.col(0), rho, degenerate, 1e-8, &flag);
    CHECK(flag);
    // Minimum-norm splits the coefficient evenly between the twin columns.
    CHECK(alpha[0] == doctest::Approx(alpha[1]).epsilon(1e-8));
  }
  SUBCASE("dimension mismatches are rejected") {
    const Eigen::VectorXd rho = Eigen::VectorXd::Ones(63);
    CHECK_THROWS_AS(sweep_update(stack.frames.col(0), rho, s), ContractError);
  }
}

TEST_CASE("a perfect fit leaves only the prior log constants") {
  SimConfig cfg = default_sim_config();
  cfg.phantom = make_letter_phantom(16, 16, 'I', 0.3, 0.1);
  cfg.sample_times = uniform_sample_times(cfg.pulse, 4, 0.8e-12);
  const SimResult sim = simulate_stack(cfg);

  PriorConfig prior = basic_prior();
  prior.sigma0_sq = prior.sigma1_sq = 1e-10;
  prior.noise_sigma_sq = 1e-8;

  SolverState state;
  state.rho = cfg.phantom.reflectance.values;
  state.labels = cfg.phantom.labels;
  state.distortions = sim.true_distortions;
  const double j_val = total_objective(state, sim.stack, prior);
  const double expected = 256.0 * std::log(std::sqrt(1e-10) / 0.5);
  CHECK(j_val == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("noiseless oracle-subspace solve recovers the phantom") {
  SimConfig cfg = default_sim_config();
  cfg.phantom = make_letter_phantom(16, 16, 'I', 0.3, 0.1);
  cfg.sample_times = uniform_sample_times(cfg.pulse, 5, 0.8e-12);
  const SimResult sim = simulate_stack(cfg);

  PriorConfig prior = basic_prior();
  prior.sigma0_sq = prior.sigma1_sq = 1e-10;
  // Noiseless stack: the recorded variance is 0, so resolution lands on the
  // mean-power floor rather than the prior or an estimate.
  prior.noise_sigma_sq = 0.0;
  prior.noise_sigma_sq =
      resolve_noise_sigma_sq(prior, sim.stack, {{"noise_sigma_sq", "0"}});
  CHECK(prior.noise_sigma_sq == doctest::Approx(noise_floor_sigma_sq(sim.stack)));

  const SolverState state = solve(sim.stack, oracle_subspaces(sim.true_distortions), prior);
  CHECK(state.converged);
  REQUIRE(state.labels.size() == cfg.phantom.labels.size());
  int errors = 0;
  for (size_t i = 0; i < state.labels.size(); ++i)
    errors += state.labels[i] != cfg.phantom.labels[i];
  CHECK(errors == 0);
  CHECK((state.rho - cfg.phantom.reflectance.values).cwiseAbs().maxCoeff() <= 1e-5);

  // J never increases along the trace.
  for (size_t k = 1; k < state.objective_trace.size(); ++k)
    CHECK(state.objective_trace[k] <=
          state.objective_trace[k - 1] + 1e-9 * std::abs(state.objective_trace[k - 1]));
  CHECK(state.rel_change_trace.size() == state.objective_trace.size());
  CHECK(static_cast<int>(state.objective_trace.size()) == state.iterations);
}

TEST_CASE("a uniform background converges to the background class everywhere") {
  SimConfig cfg = default_sim_config();
  cfg.phantom = make_letter_phantom(16, 16, ' ', 0.3, 0.1);
  cfg.sample_times = uniform_sample_times(cfg.pulse, 4, 0.8e-12);
  const SimResult sim = simulate_stack(cfg);

  PriorConfig prior = basic_prior();
  prior.sigma0_sq = prior.sigma1_sq = 1e-10;
  prior.noise_sigma_sq = 0.0;
  prior.noise_sigma_sq =
      resolve_noise_sigma_sq(prior, sim.stack, {{"noise_sigma_sq", "0"}});

  const SolverState state = solve(sim.stack, oracle_subspaces(sim.true_distortions), prior);
  CHECK(state.converged);
  for (uint8_t l : state.labels) CHECK(l == 0);
  CHECK((state.rho.array() - 0.3).abs().maxCoeff() <= 1e-5);
}

TEST_CASE("labels are invariant under a joint amplitude rescale") {
  SimConfig cfg = default_sim_config();
  cfg.phantom = make_letter_phantom(16, 16, 'T', 0.3, 0.1);
  cfg.sample_times = uniform_sample_times(cfg.pulse, 6, 0.8e-12);
  cfg.snr_db = 15.0;
  const SimResult sim = simulate_stack(cfg);
  const auto subs = oracle_subspaces(sim.true_distortions);

  PriorConfig prior = basic_prior();
  prior.sigma0_sq = prior.sigma1_sq = 1e-8;
  prior.noise_sigma_sq = sim.noise_sigma_sq;
  const SolverState base = solve(sim.stack, subs, prior);

  const double lambda = 7.5;
  FrameStack scaled = sim.stack;
  scaled.frames *= lambda;
  PriorConfig scaled_prior = prior;
  scaled_prior.rho0 *= lambda;
  scaled_prior.rho1 *= lambda;
  scaled_prior.sigma0_sq *= lambda * lambda;
  scaled_prior.sigma1_sq *= lambda * lambda;
  scaled_prior.noise_sigma_sq *= lambda * lambda;
  // The amplitude convention lives in rho, so the rescaled problem starts
  // from lambda rather than 1; every iterate is then exactly lambda times
  // the base one and the labels match.
  SolverOptions scaled_opts;
  scaled_opts.init_value = lambda;
  const SolverState rescaled = solve(scaled, subs, scaled_prior, scaled_opts);

  REQUIRE(base.labels.size() == rescaled.labels.size());
  int disagreements = 0;
  for (size_t i = 0; i < base.labels.size(); ++i)
    disagreements += base.labels[i] != rescaled.labels[i];
  CHECK(disagreements == 0);
}

TEST_CASE("solver rejects inconsistent shapes") {
  SimConfig cfg = default_sim_config();
  cfg.phantom = make_letter_phantom(16, 16, 'I', 0.3, 0.1);
  cfg.sample_times = uniform_sample_times(cfg.pulse, 3, 0.8e-12);
  const SimResult sim = simulate_stack(cfg);
  PriorConfig prior = basic_prior();

  auto subs = oracle_subspaces(sim.true_distortions);
  subs.pop_back();
  CHECK_THROWS_AS(solve(sim.stack, subs, prior), ContractError);

  SolverOptions bad;
  bad.max_iters = 0;
  CHECK_THROWS_AS(bad.validate(), ContractError);
  bad = SolverOptions{};
  bad.rel_tol = 0.0;
  CHECK_THROWS_AS(bad.validate(), ContractError);
}

TEST_CASE("noise estimate recovers the variance of a white stack") {
  FrameStack stack;
  stack.shape = GridShape{32, 32, 1e-4, 1e-4};
  stack.frames.resize(1024, 2);
  const double sigma = 0.07;
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 1024; ++i)
      stack.frames(i, j) = sigma * gaussian(900 + j, static_cast<uint64_t>(i));
  const double est = estimate_noise_sigma_sq(stack);
  CHECK(est >= 0.7 * sigma * sigma);
  CHECK(est <= 1.4 * sigma * sigma);
}

TEST_CASE("noise floor tracks the mean squared sample") {
  FrameStack stack;
  stack.shape = GridShape{4, 4, 1e-4, 1e-4};
  stack.frames = Eigen::MatrixXd::Constant(16, 2, 3.0);
  CHECK(noise_floor_sigma_sq(stack) == doctest::Approx(9e-6).epsilon(1e-14));
  stack.frames.setZero();
  CHECK_THROWS_AS(noise_floor_sigma_sq(stack), DomainError);
}

TEST_CASE("noise resolution honors the priority chain") {
  FrameStack stack;
  stack.shape = GridShape{32, 32, 1e-4, 1e-4};
  stack.frames.resize(1024, 1);
  const double sigma = 0.05;
  for (int i = 0; i < 1024; ++i) stack.frames(i, 0) = sigma * gaussian(950, static_cast<uint64_t>(i));

  PriorConfig prior = basic_prior();
  prior.noise_sigma_sq = 0.5;
  CHECK(resolve_noise_sigma_sq(prior, stack, {{"noise_sigma_sq", "0.25"}}) == 0.5);

  prior.noise_sigma_sq = 0.0;
  CHECK(resolve_noise_sigma_sq(prior, stack, {{"noise_sigma_sq", "0.25"}}) == 0.25);

  const double floored = resolve_noise_sigma_sq(prior, stack, {{"noise_sigma_sq", "0"}});
  CHECK(floored == doctest::Approx(1e-6 * stack.frames.squaredNorm() / 1024.0).epsilon(1e-12));

  CHECK_THROWS_AS(resolve_noise_sigma_sq(prior, stack, {{"noise_sigma_sq", "banana"}}),
                  FormatError);

  const double estimated = resolve_noise_sigma_sq(prior, stack, {});
  CHECK(estimated >= 0.6 * sigma * sigma);
  CHECK(estimated <= 1.5 * sigma * sigma);
}

TEST_CASE("prior and solver options parse with defaults and limits") {
  SUBCASE("p1 defaults to the complement of p0") {
    KeyValueConfig kv = KeyValueConfig::from_text("p0 = 0.7", "test");
    const PriorConfig prior = parse_prior_config(kv);
    CHECK(prior.p0 == 0.7);
    CHECK(prior.p1 == doctest::Approx(0.3));
  }
  SUBCASE("defaults survive an empty config") {
    KeyValueConfig kv = KeyValueConfig::from_text("", "test");
    const PriorConfig prior = parse_prior_config(kv);
    CHECK(prior.rho0 == 0.3);
    CHECK(prior.rho1 == 0.1);
    KeyValueConfig kv2 = KeyValueConfig::from_text("", "test");
    const SolverOptions opts = parse_solver_options(kv2);
    CHECK(opts.max_iters == 50);
    CHECK(opts.rel_tol == 1e-6);
    CHECK(!opts.exact_truncation_constants);
  }
  SUBCASE("invalid values become configuration errors") {
    KeyValueConfig bad = KeyValueConfig::from_text("sigma0_sq = -1", "test");
    CHECK_THROWS_AS(parse_prior_config(bad), ConfigError);
    KeyValueConfig bad_opts = KeyValueConfig::from_text("max_iters = 0", "test");
    CHECK_THROWS_AS(parse_solver_options(bad_opts), ConfigError);
    KeyValueConfig equal_means = KeyValueConfig::from_text("rho1 = 0.3", "test");
    CHECK_THROWS_AS(parse_prior_config(equal_means), ConfigError);
  }
  SUBCASE("the exact truncation switch parses") {
    KeyValueConfig kv = KeyValueConfig::from_text("exact_truncation_constants = true", "test");
    CHECK(parse_solver_options(kv).exact_truncation_constants);
  }
}

TEST_CASE("solver outputs land in the expected artifact set") {
  SimConfig cfg = default_sim_config();
  cfg.phantom = make_letter_phantom(16, 16, 'I', 0.3, 0.1);
  cfg.sample_times = uniform_sample_times(cfg.pulse, 3, 0.8e-12);
  const SimResult sim = simulate_stack(cfg);
  PriorConfig prior = basic_prior();
  prior.noise_sigma_sq = resolve_noise_sigma_sq(prior, sim.stack, {});
  const SolverState state = solve(sim.stack, oracle_subspaces(sim.true_distortions), prior);

  const fs::path dir = make_temp_dir() / "rec";
  write_solver_outputs(state, sim.stack.shape, dir);
  for (const char* name :
       {"rho.raw", "rho.pgm", "labels.raw", "labels.pgm", "distortions.raw", "trace.csv"})
    CHECK(fs::exists(dir / name));

  std::ifstream trace(dir / "trace.csv");
  std::string header;
  std::getline(trace, header);
  CHECK(header == "iteration,objective,rel_change");

  const RawMatrix rho_back = read_raw_matrix(dir / "rho.raw");
  CHECK(rho_back.shape.width == 16);
  CHECK((rho_back.data.col(0) - state.rho).cwiseAbs().maxCoeff() == 0.0);
}
