#include "dfn/setup.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

namespace dfn {

namespace {

RadialSpec load_radial_spec(const ConfigMap& cfg, const std::string& sec) {
  RadialSpec spec;
  if (cfg.contains(sec + ".radial.nodes")) {
    spec.scaled_nodes = cfg.get_array(sec + ".radial.nodes");
  } else {
    spec.uniform_intervals = static_cast<int>(cfg.get_number(sec + ".radial.n"));
  }
  return spec;
}

} // namespace

Setup load_setup(const ConfigMap& cfg) {
  Setup s;
  s.ps = load_parameters(cfg);

  s.geometry.dim = static_cast<int>(cfg.get_number_or("cell.dimension", 1));
  if (s.geometry.dim != 1 && s.geometry.dim != 2)
    throw ValidationError("cell.dimension must be 1 or 2");
  s.geometry.len_n = cfg.get_number("negative.thickness");
  s.geometry.len_s = cfg.get_number("separator.thickness");
  s.geometry.len_p = cfg.get_number("positive.thickness");
  s.geometry.nx_n = static_cast<int>(cfg.get_number("negative.elements"));
  s.geometry.nx_s = static_cast<int>(cfg.get_number("separator.elements"));
  s.geometry.nx_p = static_cast<int>(cfg.get_number("positive.elements"));
  if (s.geometry.dim == 2) {
    s.geometry.height = cfg.get_number("cell.height");
    s.geometry.ny = static_cast<int>(cfg.get_number("cell.ny"));
  }

  s.radial_n = load_radial_spec(cfg, "negative");
  s.radial_p = load_radial_spec(cfg, "positive");

  s.plan.t_end = cfg.get_number("simulation.t_end");
  s.plan.tau = cfg.get_number("simulation.tau");
  s.plan.solver = solver_kind_from_string(cfg.get_string_or("simulation.solver", "2ds_fc"));
  s.plan.snapshot_every = static_cast<int>(cfg.get_number_or("simulation.snapshot_every", 0));
  if (!(s.plan.tau > 0.0) || !(s.plan.t_end >= s.plan.tau))
    throw ValidationError("simulation requires 0 < tau <= t_end");
  if (cfg.contains("simulation.snapshot_every") && s.plan.snapshot_every < 1)
    throw ValidationError("simulation.snapshot_every must be >= 1");

  SolverConfig& c = s.solver_cfg;
  c.newton_abs_tol = cfg.get_number_or("solver.newton_abs_tol", c.newton_abs_tol);
  c.newton_rel_tol = cfg.get_number_or("solver.newton_rel_tol", c.newton_rel_tol);
  c.outer_rtol = cfg.get_number_or("solver.outer_rtol", c.outer_rtol);
  c.max_newton = static_cast<int>(cfg.get_number_or("solver.max_newton", c.max_newton));
  c.max_outer = static_cast<int>(cfg.get_number_or("solver.max_outer", c.max_outer));
  c.backtrack_factor = cfg.get_number_or("solver.backtrack_factor", c.backtrack_factor);
  c.max_halvings = static_cast<int>(cfg.get_number_or("solver.max_halvings", c.max_halvings));
  c.armijo_c = cfg.get_number_or("solver.armijo_c", c.armijo_c);
  c.update_norm_floor = cfg.get_number_or("solver.update_norm_floor", c.update_norm_floor);
  c.pin_phi2_dof = static_cast<Index>(cfg.get_number_or("solver.pin_dof", 0));
  if (!(c.newton_abs_tol > 0) || !(c.newton_rel_tol > 0) || !(c.outer_rtol > 0))
    throw ValidationError("solver tolerances must be positive");
  if (!(c.backtrack_factor > 0 && c.backtrack_factor < 1))
    throw ValidationError("solver.backtrack_factor out of (0,1)");
  return s;
}

StudySetup load_study(const ConfigMap& cfg) {
  const Setup base = load_setup(cfg);
  StudySetup st;
  st.ps = base.ps;
  st.geometry = base.geometry;
  st.radial_n = base.radial_n;
  st.radial_p = base.radial_p;
  st.solver_cfg = base.solver_cfg;
  st.solver = base.plan.solver;
  st.t_end = base.plan.t_end;
  st.tau_ref = base.plan.tau;
  st.axis = study_axis_from_string(cfg.get_string("study.axis"));
  for (double l : cfg.get_array("study.levels")) st.levels.push_back(static_cast<int>(l));
  st.ref_extra = static_cast<int>(cfg.get_number_or("study.ref_extra", 2));
  st.fixed_h_level = static_cast<int>(cfg.get_number_or("study.fixed_h_level", 0));
  st.fixed_dr_level = static_cast<int>(cfg.get_number_or("study.fixed_dr_level", 0));
  if (cfg.contains("study.eval_times")) st.eval_times = cfg.get_array("study.eval_times");
  return st;
}

BenchSetup load_bench(const ConfigMap& cfg) {
  const Setup base = load_setup(cfg);
  BenchSetup b;
  b.ps = base.ps;
  b.geometry = base.geometry;
  b.radial_n = base.radial_n;
  b.radial_p = base.radial_p;
  b.solver_cfg = base.solver_cfg;
  b.t_end = base.plan.t_end;
  b.tau = base.plan.tau;
  b.repetitions = static_cast<int>(cfg.get_number_or("bench.repetitions", 1));
  if (cfg.contains("bench.solvers")) {
    for (const std::string& name : cfg.get_string_array("bench.solvers"))
      b.kinds.push_back(solver_kind_from_string(name));
  } else {
    b.kinds = {SolverKind::GSN_FD,    SolverKind::GSN_Phi,   SolverKind::GSN_Macro,
               SolverKind::GSN_FC,    SolverKind::OneDS_Eta, SolverKind::TwoDS_Eta,
               SolverKind::TwoDS_FC};
  }
  return b;
}

void reject_unknown_keys(const ConfigMap& cfg) {
  const auto leftover = cfg.unconsumed();
  if (!leftover.empty()) throw ValidationError("unknown config key '" + leftover.front() + "'");
}

namespace {

void write_value(std::ostream& out, const ConfigValue& v) {
  char buf[64];
  if (const double* d = std::get_if<double>(&v)) {
    if (*d == std::floor(*d) && std::abs(*d) < 9e15)
      std::snprintf(buf, sizeof(buf), "%.1f", *d);
    else
      std::snprintf(buf, sizeof(buf), "%.17g", *d);
    out << buf;
  } else if (const bool* b = std::get_if<bool>(&v)) {
    out << (*b ? "true" : "false");
  } else if (const std::string* s = std::get_if<std::string>(&v)) {
    out << '"' << *s << '"';
  } else if (const auto* a = std::get_if<std::vector<double>>(&v)) {
    out << '[';
    for (size_t i = 0; i < a->size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", (*a)[i]);
      out << (i ? ", " : "") << buf;
    }
    out << ']';
  } else if (const auto* sa = std::get_if<std::vector<std::string>>(&v)) {
    out << '[';
    for (size_t i = 0; i < sa->size(); ++i) out << (i ? ", " : "") << '"' << (*sa)[i] << '"';
    out << ']';
  }
}

} // namespace

void write_config_toml(const ConfigMap& cfg, std::ostream& out) {
  std::map<std::string, std::map<std::string, const ConfigValue*>> sections;
  for (const auto& [key, value] : cfg.raw()) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) {
      sections[""][key] = &value;
    } else {
      sections[key.substr(0, dot)][key.substr(dot + 1)] = &value;
    }
  }
  for (const auto& [section, keys] : sections) {
    if (!section.empty()) out << '[' << section << "]\n";
    for (const auto& [rest, value] : keys) {
      out << rest << " = ";
      write_value(out, *value);
      out << '\n';
    }
    out << '\n';
  }
}

} // namespace dfn
