#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lqdemix/cli.hpp"
#include "lqdemix/imaging.hpp"

using namespace lqdemix;
using namespace lqdemix::cli;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "lqdemix_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

struct Invocation {
  int code = -1;
  std::string out;
  std::string err;
};

Invocation invoke(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = main_entry(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("empty arguments give the default separation run") {
  const RunConfig cfg = parse_config({});
  const RunConfig def = defaults_for("separate");
  CHECK(cfg.command == "separate");
  CHECK(snapshot(cfg) == snapshot(def));
  CHECK(cfg.solver == SolverId::bcd);
  CHECK(cfg.trials == 50);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("command presets") {
  const RunConfig robust = parse_config({"robust-cs"});
  CHECK(robust.spec.m == 100);
  CHECK(robust.spec.n1 == 256);
  CHECK(robust.spec.a2_kind == OperatorKind::identity);
  CHECK(robust.spec.noise.kind == NoiseModel::Kind::sas);
  CHECK(robust.spec.noise.gamma == 1e-3);
  const RunConfig inp = defaults_for("inpaint");
  CHECK(inp.solver == SolverId::multitask_bcd);
  CHECK(inp.solver_cfg.beta_start == kImageBetaStart);
  CHECK(inp.solver_cfg.q1 == 0.7);
  CHECK(inp.solver_cfg.q2 == 0.4);
}

TEST_CASE("flags override the config file") {
  const fs::path dir = fresh_dir("precedence");
  const fs::path file = dir / "run.cfg";
  std::ofstream(file) << "# desk run\ncommand = phase\ntrials = 50\nq1 = 0.3  # inline comment\n\n";
  const RunConfig from_file = parse_config({"--config", file.string()});
  CHECK(from_file.command == "phase");
  CHECK(from_file.trials == 50);
  CHECK(from_file.solver_cfg.q1 == 0.3);
  const RunConfig both = parse_config({"--config", file.string(), "--trials", "10"});
  CHECK(both.trials == 10);
  CHECK(both.solver_cfg.q1 == 0.3);
  const RunConfig positional = parse_config({"grid", "--config", file.string()});
  CHECK(positional.command == "grid");
}

TEST_CASE("malformed config files report the line") {
  const fs::path dir = fresh_dir("malformed");
  const fs::path file = dir / "bad.cfg";
  std::ofstream(file) << "trials = 5\nthis line has no equals sign\n";
  CHECK_THROWS_WITH_AS(parse_config({"--config", file.string()}), doctest::Contains(":2:"), ConfigError);
  RunConfig cfg;
  CHECK_THROWS_WITH_AS(apply_config_text(cfg, "q1 = 0.5\nq2 = zero\n", "inline"), doctest::Contains("inline:2"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(apply_config_text(cfg, "colour = red\n"), doctest::Contains("colour"), ConfigError);
  CHECK_THROWS_AS(parse_config({"--config", (dir / "missing.cfg").string()}), std::exception);
}

TEST_CASE("bad flags and values are validation errors") {
  CHECK_THROWS_WITH_AS(parse_config({"--no-such-flag", "1"}), doctest::Contains("no-such-flag"), ConfigError);
  CHECK_THROWS_AS(parse_config({"--trials", "ten"}), ConfigError);
  CHECK_THROWS_AS(parse_config({"dance"}), ConfigError);
  CHECK_THROWS_AS(parse_config({"--solver", "newton"}), ConfigError);

  const Invocation bad_q = invoke({"--q1", "1.5"});
  CHECK(bad_q.code == kValidationError);
  CHECK(bad_q.err.find("q1") != std::string::npos);
  CHECK(bad_q.err.find("[0, 1]") != std::string::npos);

  CHECK(invoke({"--solver", "mt-bcd"}).code == kValidationError);
  CHECK(invoke({"--a1", "dct", "--m", "16", "--n1", "32"}).code == kValidationError);
  CHECK(invoke({"--k", "500"}).code == kValidationError);
}

TEST_CASE("help exits cleanly") {
  const Invocation help = invoke({"--help"});
  CHECK(help.code == kOk);
  CHECK(help.out.find("--q1") != std::string::npos);
}

TEST_CASE("snapshots reload to the same configuration") {
  RunConfig cfg = parse_config({"grid", "--q1-grid", "0.1,0.9", "--mu", "2.5", "--seed", "17", "--eta1", "3"});
  const std::string text = snapshot(cfg);
  RunConfig reloaded = defaults_for("separate");
  apply_config_text(reloaded, text, "snapshot");
  CHECK(reloaded.command == "grid");
  CHECK(snapshot(reloaded) == text);
  CHECK(reloaded.q1_grid == std::vector<double>{0.1, 0.9});
  CHECK(reloaded.solver_cfg.eta1 == 3.0);
  CHECK(artifact_stem(reloaded) == "grid_bcd_17");
}

TEST_CASE("phase writes one row per K and trial") {
  const fs::path dir = fresh_dir("phase");
  const Invocation r = invoke({"phase", "--m", "32", "--n1", "32", "--n2", "32", "--k-values", "2,4,6", "--trials",
                               "3", "--max-iters", "800", "--out", dir.string()});
  REQUIRE(r.code == kOk);
  const auto rows = read_lines(dir / "phase_bcd_1.csv");
  REQUIRE(rows.size() == 1 + 9);
  CHECK(rows[0] == "k,trial,seed,relerr_x1,success,iterations,converged,failed");
  CHECK(rows[1].rfind("2,0,", 0) == 0);
  CHECK(rows[9].rfind("6,2,", 0) == 0);
  CHECK(read_lines(dir / "phase_bcd_1_rates.csv").size() == 4);
  CHECK(fs::exists(dir / "phase_bcd_1.cfg"));
}

TEST_CASE("grid writes one row per cell") {
  const fs::path dir = fresh_dir("grid");
  const Invocation r = invoke({"grid", "--m", "32", "--n1", "32", "--n2", "32", "--k", "3", "--q1-grid", "0,0.5,1",
                               "--q2-grid", "0.5", "--trials", "2", "--max-iters", "600", "--out", dir.string()});
  REQUIRE(r.code == kOk);
  const auto rows = read_lines(dir / "grid_bcd_1.csv");
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == "q1,q2,mu,mean_relerr_db,success_rate,trials");
  CHECK(rows[1].rfind("0,0.5,", 0) == 0);
  CHECK(rows[2].rfind("0.5,0.5,", 0) == 0);
  CHECK(rows[3].rfind("1,0.5,", 0) == 0);
}

TEST_CASE("separate reports and repeats byte for byte") {
  const fs::path a = fresh_dir("separate_a");
  const fs::path b = fresh_dir("separate_b");
  const std::vector<std::string> common = {"--m", "32", "--n1", "32", "--n2", "32", "--k", "3", "--q1", "0.5",
                                           "--q2", "0.5", "--seed", "4"};
  std::vector<std::string> args_a = common;
  args_a.insert(args_a.end(), {"--out", a.string()});
  std::vector<std::string> args_b = common;
  args_b.insert(args_b.end(), {"--out", b.string()});
  const Invocation ra = invoke(args_a);
  const Invocation rb = invoke(args_b);
  REQUIRE(ra.code == kOk);
  REQUIRE(rb.code == kOk);
  CHECK(ra.out.find("RelErr(x1)") != std::string::npos);
  for (const char* name : {"separate_bcd_4.csv", "separate_bcd_4_trace.json"}) {
    CHECK(read_lines(a / name) == read_lines(b / name));
  }
  CHECK(read_lines(a / "separate_bcd_4.csv").size() == 2);
}

TEST_CASE("inpaint input and output errors") {
  CHECK(invoke({"inpaint"}).code == kValidationError);
  const fs::path dir = fresh_dir("inpaint");
  CHECK(invoke({"inpaint", "--input", (dir / "nope.ppm").string(), "--out", dir.string()}).code == kIoError);

  Image img(8, 8, 1);
  img.pixels.setConstant(100.0);
  const fs::path input = dir / "flat.pgm";
  write_image(img, input);
  CHECK(invoke({"inpaint", "--input", input.string(), "--joint", "true", "--solver", "bcd"}).code ==
        kValidationError);

  const fs::path blocker = dir / "blocker";
  std::ofstream(blocker) << "a file, not a directory";
  const Invocation unwritable =
      invoke({"inpaint", "--input", input.string(), "--out", (blocker / "sub").string(), "--max-iters", "50"});
  CHECK(unwritable.code == kIoError);

  const Invocation ok = invoke({"inpaint", "--input", input.string(), "--joint", "false", "--solver", "bcd",
                                "--fraction", "0.1", "--max-iters", "400", "--out", dir.string()});
  REQUIRE(ok.code == kOk);
  CHECK(fs::exists(dir / "inpaint_bcd_1_report.json"));
  CHECK(read_lines(dir / "inpaint_bcd_1.csv").size() == 2);
}
