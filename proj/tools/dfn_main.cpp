#include "dfn/parallel.hpp"
#include "dfn/setup.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitSolver = 4;

struct GlobalOptions {
  std::string config;
  std::string out_dir = "./out";
  int threads = static_cast<int>(std::thread::hardware_concurrency());
  bool deterministic = false;
  std::string solver_override;
};

json config_as_json(const dfn::ConfigMap& cfg) {
  json j = json::object();
  for (const auto& [key, value] : cfg.raw()) {
    if (const double* d = std::get_if<double>(&value)) j[key] = *d;
    else if (const bool* b = std::get_if<bool>(&value)) j[key] = *b;
    else if (const std::string* s = std::get_if<std::string>(&value)) j[key] = *s;
    else if (const auto* a = std::get_if<std::vector<double>>(&value)) j[key] = *a;
    else if (const auto* sa = std::get_if<std::vector<std::string>>(&value)) j[key] = *sa;
  }
  return j;
}

void write_manifest(const GlobalOptions& opt, const std::string& command, const dfn::ConfigMap& cfg,
                    double wall_s, const std::vector<std::string>& outputs) {
  json manifest;
  manifest["tool"] = "dfn";
  manifest["version"] = dfn::kVersion;
  manifest["command"] = command;
  manifest["config_path"] = opt.config;
  manifest["resolved_config"] = config_as_json(cfg);
  manifest["resolved_config_file"] = "resolved_config.toml";
  manifest["threads"] = opt.threads;
  manifest["deterministic"] = opt.deterministic;
  manifest["wall_time_s"] = wall_s;
  manifest["outputs"] = outputs;
  std::ofstream mf(fs::path(opt.out_dir) / "run_manifest.json");
  mf << manifest.dump(2) << '\n';

  std::ofstream rc(fs::path(opt.out_dir) / "resolved_config.toml");
  dfn::write_config_toml(cfg, rc);
}

dfn::ConfigMap load_and_override(const GlobalOptions& opt) {
  dfn::ConfigMap cfg = dfn::load_config(opt.config);
  if (!opt.solver_override.empty())
    dfn::apply_overrides(cfg, {{"simulation.solver", '"' + opt.solver_override + '"'}});
  return cfg;
}

int run_simulate(const GlobalOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  dfn::ConfigMap cfg = load_and_override(opt);
  dfn::Setup setup = dfn::load_setup(cfg);
  dfn::reject_unknown_keys(cfg);

  const dfn::CellMesh mesh = dfn::build_laminate(setup.geometry);
  const dfn::RadialGrid rn = dfn::build_radial(setup.ps, dfn::SubdomainTag::Negative, setup.radial_n);
  const dfn::RadialGrid rp = dfn::build_radial(setup.ps, dfn::SubdomainTag::Positive, setup.radial_p);
  const dfn::DofMap dofs = dfn::build_dofmap(mesh, rn, rp);
  const dfn::RadialOperator rop_n =
      dfn::build_radial_operator(rn, setup.ps.k2_of(dfn::SubdomainTag::Negative), setup.plan.tau);
  const dfn::RadialOperator rop_p =
      dfn::build_radial_operator(rp, setup.ps.k2_of(dfn::SubdomainTag::Positive), setup.plan.tau);

  std::vector<int> keep;
  if (setup.plan.snapshot_every > 0) {
    const int K = static_cast<int>(std::floor(setup.plan.t_end / setup.plan.tau + 1e-12));
    for (int k = setup.plan.snapshot_every; k <= K; k += setup.plan.snapshot_every) keep.push_back(k);
  }

  dfn::RunResult rr = dfn::run(setup.plan, setup.ps, mesh, dofs, rop_n, rop_p, setup.solver_cfg, keep);

  std::vector<std::string> outputs;
  {
    std::ofstream csv(fs::path(opt.out_dir) / "timeseries.csv");
    dfn::write_timeseries_csv(rr.series, csv);
    outputs.push_back("timeseries.csv");
  }
  if (!rr.kept_states.empty()) {
    fs::create_directories(fs::path(opt.out_dir) / "snapshots");
    std::ofstream man(fs::path(opt.out_dir) / "snapshots" / "manifest.csv");
    man << "step,t,file\n";
    for (const auto& [step, state] : rr.kept_states) {
      char name[64];
      std::snprintf(name, sizeof(name), "state_%06d.txt", step);
      std::ofstream snap(fs::path(opt.out_dir) / "snapshots" / name);
      dfn::write_snapshot(state, snap);
      man << step << ',' << step * setup.plan.tau << ",snapshots/" << name << '\n';
      outputs.push_back(std::string("snapshots/") + name);
    }
    outputs.push_back("snapshots/manifest.csv");
  }

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(opt, "simulate", cfg, wall, outputs);
  if (rr.failed) {
    std::cerr << "solver failure: " << rr.error << "\n(partial time series written)\n";
    return kExitSolver;
  }
  std::cout << "simulate: " << rr.series.rows.size() << " steps, final voltage "
            << rr.series.rows.back().voltage << " V\n";
  return 0;
}

int run_converge(const GlobalOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  dfn::ConfigMap cfg = load_and_override(opt);
  dfn::StudySetup st = dfn::load_study(cfg);
  dfn::reject_unknown_keys(cfg);

  const dfn::ConvergenceTable table = dfn::convergence_study(st);
  {
    std::ofstream csv(fs::path(opt.out_dir) / "convergence.csv");
    dfn::write_convergence_csv(table, csv);
  }
  const std::string text = dfn::render_convergence_text(table);
  {
    std::ofstream txt(fs::path(opt.out_dir) / "convergence.txt");
    txt << text;
  }
  std::cout << text;
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(opt, "converge", cfg, wall, {"convergence.csv", "convergence.txt"});
  return 0;
}

int run_bench(const GlobalOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  dfn::ConfigMap cfg = load_and_override(opt);
  dfn::BenchSetup bench = dfn::load_bench(cfg);
  dfn::reject_unknown_keys(cfg);

  const std::vector<dfn::BenchEntry> entries = dfn::benchmark_solvers(bench);
  {
    std::ofstream csv(fs::path(opt.out_dir) / "benchmark.csv");
    dfn::write_benchmark_csv(entries, csv);
  }
  const std::string text = dfn::render_benchmark_text(entries);
  {
    std::ofstream txt(fs::path(opt.out_dir) / "benchmark.txt");
    txt << text;
  }
  std::cout << text;
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(opt, "bench", cfg, wall, {"benchmark.csv", "benchmark.txt"});
  return 0;
}

int run_validate(const GlobalOptions& opt) {
  dfn::ConfigMap cfg = load_and_override(opt);
  dfn::Setup setup = dfn::load_setup(cfg);
  if (!cfg.keys_with_prefix("study.").empty()) dfn::load_study(cfg);
  if (!cfg.keys_with_prefix("bench.").empty()) dfn::load_bench(cfg);
  dfn::reject_unknown_keys(cfg);
  (void)setup;
  std::cout << "config ok: " << opt.config << '\n';
  const double wall = 0.0;
  write_manifest(opt, "validate", cfg, wall, {});
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"DFN cell simulator: backward Euler FEM with a twice-decoupled solver"};
  app.require_subcommand(1);

  GlobalOptions opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "config file (.toml or .json)")->required();
    sub->add_option("--out", opt.out_dir, "output directory (default ./out)");
    sub->add_option("--threads", opt.threads, "worker thread cap");
    sub->add_flag("--deterministic", opt.deterministic,
                  "serialize element loops (results are bit-identical either way)");
    sub->add_option("--solver", opt.solver_override, "override simulation.solver");
  };
  CLI::App* simulate = app.add_subcommand("simulate", "run a time-marching simulation");
  CLI::App* converge = app.add_subcommand("converge", "run a convergence-order study");
  CLI::App* bench = app.add_subcommand("bench", "compare solver performance");
  CLI::App* validate = app.add_subcommand("validate", "validate a config file");
  for (CLI::App* sub : {simulate, converge, bench, validate}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e); // prints usage or error text
    return e.get_exit_code() == 0 ? 0 : kExitUsage;
  }

  dfn::set_max_threads(opt.deterministic ? 1 : std::max(1, opt.threads));

  try {
    std::filesystem::create_directories(opt.out_dir);
    if (simulate->parsed()) return run_simulate(opt);
    if (converge->parsed()) return run_converge(opt);
    if (bench->parsed()) return run_bench(opt);
    if (validate->parsed()) return run_validate(opt);
  } catch (const dfn::ValidationError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const dfn::SolverError& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitUsage;
}
