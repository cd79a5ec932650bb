#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

using namespace std::string_literals;
namespace fs = std::filesystem;

namespace {

std::string cli() {
#ifdef SWEEPDEMOD_CLI_PATH
  const char* path = SWEEPDEMOD_CLI_PATH;
#else
  const char* path = std::getenv("SWEEPDEMOD_CLI_PATH");
#endif
  REQUIRE_MESSAGE(path != nullptr, "SWEEPDEMOD_CLI_PATH must point at the built binary");
  return path;
}

fs::path make_temp_dir() {
  static int counter = 0;
  const fs::path dir =
      fs::temp_directory_path() / ("swpdmod_cli_test_" + std::to_string(::getpid()) + "_" +
                                   std::to_string(counter++));
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = cli() + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string tiny_sim_args(const fs::path& out, int seed) {
  return "simulate --out "s + out.string() +
         " --set width=8 --set height=8 --set glyph=I --set frames=4 --set snr_db=18 --seed " +
         std::to_string(seed);
}

}  // namespace

TEST_CASE("simulate, solve, eval pipeline produces scored artifacts") {
  const fs::path dir = make_temp_dir();
  const fs::path stack = dir / "stack";
  const fs::path rec = dir / "rec";
  const fs::path log = dir / "log.txt";

  REQUIRE(run(tiny_sim_args(stack, 3), log) == 0);
  for (const char* name : {"stack.meta", "stack.raw", "frame_000.pgm", "truth_rho.raw",
                           "truth_labels.raw", "truth_distortions.raw"})
    CHECK(fs::exists(stack / name));

  REQUIRE(run("solve --stack "s + stack.string() + " --subspace oracle --out " + rec.string() +
                  " --set sigma0_sq=1e-8 --set sigma1_sq=1e-8",
              log) == 0);
  for (const char* name : {"rho.raw", "rho.pgm", "labels.raw", "trace.csv"})
    CHECK(fs::exists(rec / name));

  const fs::path metrics = dir / "metrics.csv";
  REQUIRE(run("eval --stack "s + stack.string() + " --rec " + rec.string() + " --out " +
                  metrics.string(),
              log) == 0);
  const std::string out = slurp(log);
  CHECK(out.find("mse_raw=") != std::string::npos);
  REQUIRE(fs::exists(metrics));
  const std::string csv = slurp(metrics);
  CHECK(csv.rfind("metric,value\n", 0) == 0);
  CHECK(csv.find("misclass_rate,") != std::string::npos);
}

TEST_CASE("precomputed subspace directories feed the solver") {
  const fs::path dir = make_temp_dir();
  const fs::path stack = dir / "stack";
  const fs::path subs = dir / "subs";
  const fs::path rec = dir / "rec";
  const fs::path log = dir / "log.txt";

  REQUIRE(run(tiny_sim_args(stack, 11), log) == 0);
  REQUIRE(run("subspace --stack "s + stack.string() + " --out " + subs.string() +
                  " --set n_coeffs=16",
              log) == 0);
  CHECK(fs::exists(subs / "subspace_000.raw"));
  CHECK(fs::exists(subs / "subspace_000.txt"));
  CHECK(fs::exists(subs / "subspace_003.raw"));

  REQUIRE(run("solve --stack "s + stack.string() + " --subspace " + subs.string() + " --out " +
                  rec.string(),
              log) == 0);
  CHECK(fs::exists(rec / "rho.raw"));
}

TEST_CASE("frames sweep output is byte-stable across runs") {
  const fs::path dir = make_temp_dir();
  const fs::path log = dir / "log.txt";
  const std::string sweep_args =
      " --set width=8 --set height=8 --set glyph=I --set frames=4 --set snr_db=15"
      " --set frame_counts=2,3 --set trials=2 --set subspace_mode=oracle --seed 7";

  const fs::path csv1 = dir / "sweep1.csv";
  const fs::path csv2 = dir / "sweep2.csv";
  REQUIRE(run("frames-sweep --out "s + csv1.string() + sweep_args, log) == 0);
  REQUIRE(run("frames-sweep --out "s + csv2.string() + sweep_args, log) == 0);
  const std::string a = slurp(csv1);
  CHECK(a == slurp(csv2));
  CHECK(a.rfind("m,subspace_mode,", 0) == 0);

  const fs::path snr_csv = dir / "snr.csv";
  REQUIRE(run("snr-sweep --out "s + snr_csv.string() +
                  " --set width=8 --set height=8 --set glyph=I --set frames=3"
                  " --set snr_values=12,20 --set trials=2 --set subspace_mode=oracle --seed 9",
              log) == 0);
  CHECK(slurp(snr_csv).rfind("snr_db,subspace_mode,", 0) == 0);
}

TEST_CASE("render converts raw matrices to graymaps") {
  const fs::path dir = make_temp_dir();
  const fs::path stack = dir / "stack";
  const fs::path log = dir / "log.txt";
  REQUIRE(run(tiny_sim_args(stack, 5), log) == 0);

  const fs::path single = dir / "truth.pgm";
  REQUIRE(run("render "s + (stack / "truth_rho.raw").string() + " --out " + single.string(),
              log) == 0);
  CHECK(fs::exists(single));
  CHECK(slurp(single).rfind("P5", 0) == 0);

  const fs::path frames_dir = dir / "frames";
  REQUIRE(run("render "s + (stack / "stack.raw").string() + " --out " + frames_dir.string() +
                  " --normalize global",
              log) == 0);
  CHECK(fs::exists(frames_dir / "frame_000.pgm"));
  CHECK(fs::exists(frames_dir / "frame_003.pgm"));

  REQUIRE(run("render "s + (stack / "stack.raw").string() + " --normalize sideways", log) == 1);
  CHECK(slurp(log).find("error:") != std::string::npos);
}

TEST_CASE("bad invocations fail loudly") {
  const fs::path dir = make_temp_dir();
  const fs::path log = dir / "log.txt";

  CHECK(run("transmogrify", log) != 0);
  CHECK(run("", log) != 0);  // a subcommand is required

  const fs::path stack = dir / "stack";
  REQUIRE(run(tiny_sim_args(stack, 2), log) == 0);
  CHECK(run("solve --stack "s + stack.string() + " --subspace oracle --out " +
                (dir / "rec").string() + " --set bogus_key=1",
            log) == 1);
  CHECK(slurp(log).find("error:") != std::string::npos);
  CHECK(slurp(log).find("bogus_key") != std::string::npos);

  CHECK(run("simulate --out "s + (dir / "s2").string() + " --set glyph=QQ", log) == 1);
  CHECK(slurp(log).find("error:") != std::string::npos);
}

TEST_CASE("seed overrides change the synthesized data") {
  const fs::path dir = make_temp_dir();
  const fs::path log = dir / "log.txt";
  const fs::path a = dir / "a";
  const fs::path b = dir / "b";
  const fs::path c = dir / "c";
  REQUIRE(run(tiny_sim_args(a, 1), log) == 0);
  REQUIRE(run(tiny_sim_args(b, 2), log) == 0);
  REQUIRE(run(tiny_sim_args(c, 1), log) == 0);
  const std::string raw_a = slurp(a / "stack.raw");
  CHECK(raw_a != slurp(b / "stack.raw"));
  CHECK(raw_a == slurp(c / "stack.raw"));
}

TEST_CASE("baseline subcommand writes lifted factors") {
  const fs::path dir = make_temp_dir();
  const fs::path stack = dir / "stack";
  const fs::path rec = dir / "base";
  const fs::path log = dir / "log.txt";
  REQUIRE(run(tiny_sim_args(stack, 21), log) == 0);
  REQUIRE(run("baseline --stack "s + stack.string() + " --subspace oracle --out " + rec.string() +
                  " --set nuclear_stages=3 --set nuclear_iters=30",
              log) == 0);
  for (const char* name : {"rho.raw", "rho.pgm", "x.raw", "alpha.raw"})
    CHECK(fs::exists(rec / name));
}
