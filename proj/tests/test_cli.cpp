#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct CommandResult {
  int exit_code = -1;
  std::string output;
};

CommandResult run_cli(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / "dfn_cli_test_output.txt";
  const std::string cmd = std::string(DFN_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  CommandResult r;
  r.exit_code = WEXITSTATUS(raw);
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const std::string kDeskConfig = std::string(DFN_CONFIG_DIR) + "/desk.toml";

} // namespace

TEST_CASE("simulate writes the time series and a manifest") {
  const fs::path out = fresh_dir("dfn_cli_sim");
  const CommandResult r = run_cli("simulate --config " + kDeskConfig + " --out " + out.string());
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(out / "timeseries.csv"));
  CHECK(fs::exists(out / "run_manifest.json"));
  CHECK(fs::exists(out / "resolved_config.toml"));
  const std::string csv = slurp(out / "timeseries.csv");
  CHECK(csv.rfind("t,voltage,c1_min,c1_max,c2surf_min,c2surf_max,source_balance,outer_its,"
                  "newton_its,wall_s", 0) == 0);
}

TEST_CASE("the JSON twin of the desk config produces the same series") {
  const fs::path out_t = fresh_dir("dfn_cli_toml");
  const fs::path out_j = fresh_dir("dfn_cli_json");
  CHECK(run_cli("simulate --config " + kDeskConfig + " --out " + out_t.string()).exit_code == 0);
  CHECK(run_cli("simulate --config " + std::string(DFN_CONFIG_DIR) + "/desk.json --out " +
                out_j.string()).exit_code == 0);
  std::istringstream la(slurp(out_t / "timeseries.csv")), lb(slurp(out_j / "timeseries.csv"));
  std::string ra, rb;
  while (std::getline(la, ra) && std::getline(lb, rb))
    CHECK(ra.substr(0, ra.rfind(',')) == rb.substr(0, rb.rfind(',')));
}

TEST_CASE("unknown subcommand exits with the usage code") {
  const CommandResult r = run_cli("frobnicate --config x.toml");
  CHECK(r.exit_code == 2);
}

TEST_CASE("missing required flag exits with the usage code") {
  const CommandResult r = run_cli("simulate");
  CHECK(r.exit_code == 2);
}

TEST_CASE("validate reports the violated invariant with exit code 3") {
  const fs::path bad = fs::temp_directory_path() / "dfn_bad_config.toml";
  {
    std::ifstream in(kDeskConfig);
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    const std::string needle = "bv.alpha_a = 0.5";
    text.replace(text.find(needle), needle.size(), "bv.alpha_a = 1.5");
    std::ofstream outf(bad);
    outf << text;
  }
  const CommandResult r = run_cli("validate --config " + bad.string());
  CHECK(r.exit_code == 3);
  CHECK(r.output.find("alpha_a out of (0,1)") != std::string::npos);
}

TEST_CASE("validate accepts the shipped configs") {
  for (const char* name : {"desk.toml", "p2d_1c.toml", "study_h.toml", "study_dr.toml",
                           "study_tau.toml", "bench.toml"}) {
    const CommandResult r =
        run_cli("validate --config " + std::string(DFN_CONFIG_DIR) + "/" + name);
    CHECK(r.exit_code == 0);
  }
}

TEST_CASE("unknown config keys exit with code 3") {
  const fs::path bad = fs::temp_directory_path() / "dfn_unknown_key.toml";
  {
    std::ofstream outf(bad, std::ios::trunc);
    outf << slurp(kDeskConfig) << "\n[negative]\nmystery_knob = 1.0\n";
  }
  const CommandResult r = run_cli("validate --config " + bad.string());
  CHECK(r.exit_code == 3);
  CHECK(r.output.find("mystery_knob") != std::string::npos);
}

TEST_CASE("solver failure exits with code 4") {
  const fs::path bad = fs::temp_directory_path() / "dfn_failing_run.toml";
  {
    std::ofstream outf(bad, std::ios::trunc);
    outf << slurp(kDeskConfig) << "\n[solver]\nmax_outer = 2\n";
  }
  const fs::path out = fresh_dir("dfn_cli_fail");
  const CommandResult r =
      run_cli("simulate --config " + bad.string() + " --solver gsn_fd --out " + out.string());
  CHECK(r.exit_code == 4);
  CHECK(fs::exists(out / "timeseries.csv")); // partial series still written
}

TEST_CASE("manifest round trip reproduces the outputs bit-exactly") {
  const fs::path out_a = fresh_dir("dfn_cli_a");
  CommandResult r = run_cli("simulate --config " + kDeskConfig + " --deterministic --out " +
                            out_a.string());
  REQUIRE(r.exit_code == 0);
  const fs::path out_b = fresh_dir("dfn_cli_b");
  r = run_cli("simulate --config " + (out_a / "resolved_config.toml").string() +
              " --deterministic --out " + out_b.string());
  REQUIRE(r.exit_code == 0);

  // wall-time columns aside, the series must match bit for bit
  std::istringstream la(slurp(out_a / "timeseries.csv")), lb(slurp(out_b / "timeseries.csv"));
  std::string ra, rb;
  int lines = 0;
  while (std::getline(la, ra) && std::getline(lb, rb)) {
    CHECK(ra.substr(0, ra.rfind(',')) == rb.substr(0, rb.rfind(',')));
    ++lines;
  }
  CHECK(lines >= 33);
}

TEST_CASE("snapshots are written at the configured cadence") {
  const fs::path out = fresh_dir("dfn_cli_snap");
  const CommandResult r = run_cli("simulate --config " + std::string(DFN_CONFIG_DIR) +
                                  "/p2d_1c.toml --out " + out.string());
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(out / "snapshots" / "manifest.csv"));
  CHECK(fs::exists(out / "snapshots" / "state_000010.txt"));
  CHECK(fs::exists(out / "snapshots" / "state_000020.txt"));
}

TEST_CASE("converge subcommand emits table artifacts") {
  // shrink the study so this stays a smoke test
  const fs::path cfg = fs::temp_directory_path() / "dfn_tiny_study.toml";
  {
    std::string text = slurp(std::string(DFN_CONFIG_DIR) + "/study_tau.toml");
    std::ofstream outf(cfg, std::ios::trunc);
    outf << text;
  }
  const fs::path out = fresh_dir("dfn_cli_study");
  const CommandResult r = run_cli("converge --config " + cfg.string() + " --out " + out.string());
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(out / "convergence.csv"));
  CHECK(fs::exists(out / "convergence.txt"));
  CHECK(r.output.find("order") != std::string::npos);
}

TEST_CASE("bench subcommand emits comparison artifacts") {
  const fs::path cfg = fs::temp_directory_path() / "dfn_tiny_bench.toml";
  {
    std::string text = slurp(std::string(DFN_CONFIG_DIR) + "/bench.toml");
    const std::string needle = "t_end = 2.0";
    text.replace(text.find(needle), needle.size(), "t_end = 0.3");
    std::ofstream outf(cfg, std::ios::trunc);
    outf << text;
  }
  const fs::path out = fresh_dir("dfn_cli_bench");
  const CommandResult r = run_cli("bench --config " + cfg.string() + " --out " + out.string());
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(out / "benchmark.csv"));
  CHECK(fs::exists(out / "benchmark.txt"));
}
