#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "swpdmod/altmin.hpp"
#include "swpdmod/config.hpp"
#include "swpdmod/errors.hpp"
#include "swpdmod/eval.hpp"
#include "swpdmod/forward.hpp"
#include "swpdmod/io.hpp"
#include "swpdmod/lowrank.hpp"
#include "swpdmod/parallel.hpp"
#include "swpdmod/wavelet.hpp"

namespace {

using namespace swpdmod;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string seed_text;  // empty = keep config/default seed
  int workers = 0;
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config_path, "key=value configuration file");
  sub->add_option("--set", args.overrides, "override a config key (repeatable)")
      ->type_name("KEY=VALUE");
  sub->add_option("--seed", args.seed_text, "override the RNG seed");
  sub->add_option("--workers", args.workers, "worker threads (0 = all cores)");
}

KeyValueConfig load_config(const CommonArgs& args, bool seed_drives_sweep = false) {
  if (args.workers != 0) set_worker_count(args.workers);
  KeyValueConfig kv = args.config_path.empty()
                          ? KeyValueConfig::from_text("", "<defaults>")
                          : KeyValueConfig::from_file(args.config_path);
  for (const std::string& entry : args.overrides) {
    const size_t eq = entry.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("--set expects KEY=VALUE, got '" + entry + "'");
    kv.set_override(entry.substr(0, eq), entry.substr(eq + 1));
  }
  if (!args.seed_text.empty()) {
    kv.set_override("seed", args.seed_text);
    if (seed_drives_sweep) kv.set_override("sweep_seed", args.seed_text);
  }
  return kv;
}

struct SubspaceBuildArgs {
  SubspaceOptions opts;
  int n_coeffs = 100;
};

SubspaceBuildArgs parse_subspace_keys(KeyValueConfig& kv) {
  SubspaceBuildArgs out;
  out.n_coeffs = kv.get_int("n_coeffs", out.n_coeffs);
  out.opts.family = kv.get_string("family", out.opts.family);
  out.opts.levels = kv.get_int("levels", out.opts.levels);
  out.opts.force_include_scaling =
      kv.get_bool("force_include_scaling", out.opts.force_include_scaling);
  try {
    out.opts.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid subspace configuration: ") + e.what());
  }
  return out;
}

std::vector<SweepSubspace> oracle_subspaces_from_truth(const std::filesystem::path& stack_dir,
                                                       const FrameStack& stack) {
  const GroundTruth truth = read_ground_truth(stack_dir, stack.shape);
  if (truth.distortions.cols() != stack.frame_count())
    throw FormatError("oracle subspaces: truth distortion frame count does not match the stack");
  std::vector<SweepSubspace> subspaces;
  subspaces.reserve(static_cast<size_t>(stack.frame_count()));
  for (int j = 0; j < stack.frame_count(); ++j)
    subspaces.push_back(oracle_subspace(truth.distortions, j));
  return subspaces;
}

std::vector<SweepSubspace> resolve_subspaces(const std::string& mode,
                                             const std::filesystem::path& stack_dir,
                                             const FrameStack& stack, KeyValueConfig& kv) {
  if (mode.empty() || mode == "wavelet") {
    const SubspaceBuildArgs args = parse_subspace_keys(kv);
    return build_subspaces(stack, args.n_coeffs, args.opts);
  }
  if (mode == "oracle") return oracle_subspaces_from_truth(stack_dir, stack);
  return read_subspaces(mode, stack.shape);
}

double meta_double(const std::map<std::string, std::string>& meta, const std::string& key,
                   double fallback) {
  auto it = meta.find(key);
  if (it == meta.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw FormatError("stack metadata: malformed " + key + " '" + it->second + "'");
  }
}

int run_simulate(const CommonArgs& common, const std::string& out_dir) {
  KeyValueConfig kv = load_config(common);
  const SimConfig cfg = parse_sim_config(kv);
  kv.finish();
  const SimResult result = simulate_stack(cfg);
  write_sim_result(result, cfg, out_dir);
  const std::string noise =
      cfg.snr_db ? format_double(*cfg.snr_db) + " dB" : std::string("noiseless");
  std::cout << "simulate: " << cfg.phantom.reflectance.shape.width << "x"
            << cfg.phantom.reflectance.shape.height << " px, "
            << cfg.sample_times.size() << " frames, " << noise
            << ", sigma_sq=" << format_double(result.noise_sigma_sq) << " -> " << out_dir
            << "\n";
  return 0;
}

int run_subspace(const CommonArgs& common, const std::string& stack_dir, const std::string& mode,
                 const std::string& out_dir) {
  KeyValueConfig kv = load_config(common);
  const FrameStack stack = read_frame_stack(stack_dir);
  std::vector<SweepSubspace> subspaces;
  if (mode == "oracle") {
    subspaces = oracle_subspaces_from_truth(stack_dir, stack);
    kv.finish();
  } else if (mode.empty() || mode == "wavelet") {
    const SubspaceBuildArgs args = parse_subspace_keys(kv);
    kv.finish();
    subspaces = build_subspaces(stack, args.n_coeffs, args.opts);
  } else {
    throw ConfigError("subspace: --subspace must be 'wavelet' or 'oracle', got '" + mode + "'");
  }
  write_subspaces(subspaces, stack.shape, out_dir);
  std::cout << "subspace: " << subspaces.size() << " frames, N_j="
            << subspaces.front().basis.cols() << ", " << subspaces.front().provenance << " -> "
            << out_dir << "\n";
  return 0;
}

int run_solve(const CommonArgs& common, const std::string& stack_dir, const std::string& mode,
              const std::string& out_dir) {
  KeyValueConfig kv = load_config(common);
  const FrameStack stack = read_frame_stack(stack_dir);
  std::vector<SweepSubspace> subspaces = resolve_subspaces(mode, stack_dir, stack, kv);
  PriorConfig prior = parse_prior_config(kv);
  const SolverOptions opts = parse_solver_options(kv);
  kv.finish();
  prior.noise_sigma_sq = resolve_noise_sigma_sq(prior, stack, read_stack_meta(stack_dir));

  const SolverState state = solve(stack, subspaces, prior, opts);
  write_solver_outputs(state, stack.shape, out_dir);
  std::cout << "solve: " << (state.converged ? "converged" : "stopped") << " after "
            << state.iterations << " iterations, J=" << format_double(state.objective_trace.back())
            << ", rel_change=" << format_double(state.rel_change_trace.back())
            << (state.rank_deficient ? ", rank-deficient sweeps" : "") << " -> " << out_dir
            << "\n";
  return 0;
}

int run_baseline(const CommonArgs& common, const std::string& stack_dir, const std::string& mode,
                 const std::string& out_dir) {
  KeyValueConfig kv = load_config(common);
  const FrameStack stack = read_frame_stack(stack_dir);
  std::vector<SweepSubspace> subspaces = resolve_subspaces(mode, stack_dir, stack, kv);

  NuclearOptions nopts;
  nopts.lambda = kv.get_double("nuclear_lambda", nopts.lambda);
  nopts.iters = kv.get_int("nuclear_iters", nopts.iters);
  nopts.stages = kv.get_int("nuclear_stages", nopts.stages);
  nopts.stage_factor = kv.get_double("nuclear_stage_factor", nopts.stage_factor);
  nopts.rel_tol = kv.get_double("nuclear_rel_tol", nopts.rel_tol);
  nopts.seed = kv.get_uint64("seed", nopts.seed);
  kv.finish();
  try {
    nopts.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid baseline configuration: ") + e.what());
  }

  const MeasurementOperator op = MeasurementOperator::from_subspaces(subspaces);
  const LiftedSolution sol = solve_nuclear_path(stack, op, nopts);

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path out(out_dir);
  write_raw_matrix(out / "rho.raw", stack.shape, sol.beta);
  write_pgm16(out / "rho.pgm", stack.shape, sol.beta);
  write_raw_matrix(out / "x.raw", stack.shape, sol.x);
  GridShape alpha_shape{static_cast<int>(sol.alpha.size()), 1, 1.0, 1.0};
  write_raw_matrix(out / "alpha.raw", alpha_shape, sol.alpha);
  std::cout << "baseline: rank " << sol.rank << ", " << sol.iterations
            << " iterations, residual=" << format_double(sol.residual)
            << ", lambda=" << format_double(sol.lambda)
            << (sol.factor_fallback ? ", singular-pair factors" : "") << " -> " << out_dir
            << "\n";
  return 0;
}

int run_eval(const CommonArgs& common, const std::string& stack_dir, const std::string& rec_dir,
             const std::string& out_path) {
  KeyValueConfig kv = load_config(common);
  const bool cfg_rho0 = kv.has("rho0");
  const bool cfg_rho1 = kv.has("rho1");
  const PriorConfig prior = parse_prior_config(kv);
  kv.finish();

  const FrameStack stack = read_frame_stack(stack_dir);
  const GroundTruth truth = read_ground_truth(stack_dir, stack.shape);
  const auto meta = read_stack_meta(stack_dir);
  const double rho0 = cfg_rho0 ? prior.rho0 : meta_double(meta, "rho0", prior.rho0);
  const double rho1 = cfg_rho1 ? prior.rho1 : meta_double(meta, "rho1", prior.rho1);

  const std::filesystem::path rec(rec_dir);
  const RawMatrix rho_raw = read_raw_matrix(rec / "rho.raw");
  if (rho_raw.shape.width != stack.shape.width || rho_raw.shape.height != stack.shape.height ||
      rho_raw.data.cols() != 1)
    throw FormatError("eval: rho.raw dimensions do not match the stack");
  const ImageGrid estimate(stack.shape, rho_raw.data.col(0));

  const double raw_mse = mse(estimate, truth.rho);
  const ImageGrid rounded = binary_round(estimate, rho0, rho1);
  const double rounded_mse = mse(rounded, truth.rho);

  std::vector<uint8_t> labels(static_cast<size_t>(stack.shape.pixels()));
  if (std::filesystem::exists(rec / "labels.raw")) {
    const RawMatrix label_raw = read_raw_matrix(rec / "labels.raw");
    if (label_raw.data.rows() != stack.shape.pixels() || label_raw.data.cols() != 1)
      throw FormatError("eval: labels.raw dimensions do not match the stack");
    for (int i = 0; i < stack.shape.pixels(); ++i) labels[i] = label_raw.data(i, 0) >= 0.5;
  } else {
    for (int i = 0; i < stack.shape.pixels(); ++i) labels[i] = rounded.values[i] == rho1;
  }
  const double misclass = misclassification_rate(labels, truth.labels);

  std::cout << "eval: mse_raw=" << format_double(raw_mse)
            << ", mse_rounded=" << format_double(rounded_mse)
            << ", misclass_rate=" << format_double(misclass) << "\n";
  if (!out_path.empty()) {
    std::string csv = "metric,value\n";
    csv += "mse_raw," + format_double(raw_mse) + "\n";
    csv += "mse_rounded," + format_double(rounded_mse) + "\n";
    csv += "misclass_rate," + format_double(misclass) + "\n";
    atomic_write_text(out_path, csv);
  }
  return 0;
}

int run_sweep(const CommonArgs& common, const std::string& mode_flag, const std::string& out_path,
              bool frames_sweep) {
  KeyValueConfig kv = load_config(common, /*seed_drives_sweep=*/true);
  if (!mode_flag.empty()) {
    if (mode_flag != "wavelet" && mode_flag != "oracle")
      throw ConfigError("sweep: --subspace must be 'wavelet' or 'oracle', got '" + mode_flag +
                        "'");
    kv.set_override("subspace_mode", mode_flag);
  }
  // The frames sweep draws subsets from a 20-frame pool by default; the
  // SNR sweep keeps the configured frame count.
  if (frames_sweep && !kv.has("frames") && !kv.has("sample_times"))
    kv.set_override("frames", "20");

  const SimConfig sim = parse_sim_config(kv);
  const SweepExperimentConfig sweep = parse_sweep_config(kv);
  const PriorConfig prior = parse_prior_config(kv);
  const SolverOptions opts = parse_solver_options(kv);
  kv.finish();

  const SweepTable table = frames_sweep ? run_frames_sweep(sweep, sim, prior, opts)
                                        : run_snr_sweep(sweep, sim, prior, opts);
  write_sweep_csv(table, out_path);
  std::cout << (frames_sweep ? "frames-sweep: " : "snr-sweep: ") << table.rows.size()
            << " points x " << sweep.trials << " trials, "
            << subspace_mode_name(sweep.subspace_mode) << " -> " << out_path << "\n";
  return 0;
}

int run_render(const std::string& input, std::string out_path, const std::string& normalize) {
  if (normalize != "frame" && normalize != "global")
    throw ConfigError("render: --normalize must be 'frame' or 'global', got '" + normalize + "'");
  const RawMatrix raw = read_raw_matrix(input);
  const double lo = raw.data.size() ? raw.data.minCoeff() : 0.0;
  const double hi = raw.data.size() ? raw.data.maxCoeff() : 0.0;

  if (raw.data.cols() == 1) {
    if (out_path.empty())
      out_path = std::filesystem::path(input).replace_extension(".pgm").string();
    write_pgm16(out_path, raw.shape, raw.data.col(0));
    std::cout << "render: 1 frame -> " << out_path << "\n";
    return 0;
  }

  if (out_path.empty())
    out_path = (std::filesystem::path(input).parent_path() /
                (std::filesystem::path(input).stem().string() + "_pgm"))
                   .string();
  std::filesystem::create_directories(out_path);
  for (int j = 0; j < raw.data.cols(); ++j) {
    const std::filesystem::path frame_path = std::filesystem::path(out_path) / frame_file_name(j);
    if (normalize == "global") {
      write_pgm16(frame_path, raw.shape, raw.data.col(j), lo, hi);
    } else {
      write_pgm16(frame_path, raw.shape, raw.data.col(j));
    }
  }
  std::cout << "render: " << raw.data.cols() << " frames (" << normalize << " scale) -> "
            << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"THz frame-stack demodulation: simulate, build subspaces, solve, evaluate"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string stack_dir, out_path, rec_dir;
  std::string subspace_mode = "wavelet";
  std::string normalize = "frame";
  std::string render_input;

  CLI::App* sim = app.add_subcommand("simulate", "synthesize a frame stack with ground truth");
  add_common(sim, common);
  sim->add_option("--out", out_path, "output stack directory")->required();

  CLI::App* sub = app.add_subcommand("subspace", "precompute per-frame sweep subspaces");
  add_common(sub, common);
  sub->add_option("--stack", stack_dir, "input stack directory")->required();
  sub->add_option("--subspace", subspace_mode, "wavelet | oracle (default: wavelet)");
  sub->add_option("--out", out_path, "output subspace directory")->required();

  CLI::App* slv = app.add_subcommand("solve", "run the alternating MAP solver");
  add_common(slv, common);
  slv->add_option("--stack", stack_dir, "input stack directory")->required();
  slv->add_option("--subspace", subspace_mode, "wavelet | oracle | <subspace dir> (default: wavelet)");
  slv->add_option("--out", out_path, "output directory")->required();

  CLI::App* base = app.add_subcommand("baseline", "run the nuclear-norm lifting baseline");
  add_common(base, common);
  base->add_option("--stack", stack_dir, "input stack directory")->required();
  base->add_option("--subspace", subspace_mode, "wavelet | oracle | <subspace dir> (default: wavelet)");
  base->add_option("--out", out_path, "output directory")->required();

  CLI::App* ev = app.add_subcommand("eval", "score a reconstruction against ground truth");
  add_common(ev, common);
  ev->add_option("--stack", stack_dir, "stack directory holding the ground truth")->required();
  ev->add_option("--rec", rec_dir, "reconstruction directory (rho.raw, labels.raw)")->required();
  ev->add_option("--out", out_path, "optional metrics CSV path");

  CLI::App* fsw = app.add_subcommand("frames-sweep", "MSE vs number of frames");
  add_common(fsw, common);
  fsw->add_option("--subspace", subspace_mode, "wavelet | oracle (default: wavelet)")->default_val("");
  fsw->add_option("--out", out_path, "output CSV path")->default_val("frames_sweep.csv");

  CLI::App* ssw = app.add_subcommand("snr-sweep", "MSE vs SNR at fixed frame count");
  add_common(ssw, common);
  ssw->add_option("--subspace", subspace_mode, "wavelet | oracle (default: wavelet)")->default_val("");
  ssw->add_option("--out", out_path, "output CSV path")->default_val("snr_sweep.csv");

  CLI::App* ren = app.add_subcommand("render", "convert a raw matrix to 16-bit PGM");
  ren->add_option("input", render_input, "raw matrix file")->required();
  ren->add_option("--out", out_path, "output file or directory");
  ren->add_option("--normalize", normalize, "frame | global");

  try {
    app.parse(argc, argv);
    if (*sim) return run_simulate(common, out_path);
    if (*sub) return run_subspace(common, stack_dir, subspace_mode, out_path);
    if (*slv) return run_solve(common, stack_dir, subspace_mode, out_path);
    if (*base) return run_baseline(common, stack_dir, subspace_mode, out_path);
    if (*ev) return run_eval(common, stack_dir, rec_dir, out_path);
    if (*fsw) return run_sweep(common, subspace_mode, out_path, true);
    if (*ssw) return run_sweep(common, subspace_mode, out_path, false);
    if (*ren) return run_render(render_input, out_path, normalize);
    std::cerr << "error: no subcommand\n";
    return 1;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
