// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line each. Exits nonzero if any criterion fails.

#include "test_helpers.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <string>
#include <vector>

using namespace dfn;
using namespace dfn::testing;

namespace {

int g_failures = 0;

void report(int number, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s — %s\n", pass ? "PASS" : "FAIL", number, name.c_str(),
              detail.c_str());
  if (!pass) ++g_failures;
}

bool in_window(double v, double lo, double hi) { return v >= lo && v <= hi; }

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

StudySetup load_study_config(const char* name) {
  ConfigMap cfg = load_config(std::string(DFN_CONFIG_DIR) + "/" + name);
  return load_study(cfg);
}

// ---------------------------------------------------------------- criteria

void criterion_1_spatial_order() {
  const ConvergenceTable t = convergence_study(load_study_config("study_h.toml"));
  const double c1 = t.fitted_order[static_cast<int>(ErrorNormKind::H1_c1)];
  const double p1 = t.fitted_order[static_cast<int>(ErrorNormKind::H1_phi1)];
  const double p2 = t.fitted_order[static_cast<int>(ErrorNormKind::H1_phi2)];
  const double cs = t.fitted_order[static_cast<int>(ErrorNormKind::L2_surf_c2)];
  const bool pass = in_window(c1, 0.9, 1.3) && in_window(p1, 0.9, 1.3) &&
                    in_window(p2, 0.9, 1.3) && in_window(cs, 0.9, 1.3);
  report(1, "spatial order (h)", pass,
         fmt("fitted orders: c1 %.2f, phi1 %.2f, phi2 %.2f, c2surf %.2f (window [0.9, 1.3])", c1,
             p1, p2, cs));
}

void criterion_2_radial_order() {
  const ConvergenceTable t = convergence_study(load_study_config("study_dr.toml"));
  const double l2r = t.fitted_order[static_cast<int>(ErrorNormKind::L2_L2r_c2)];
  const double surf = t.fitted_order[static_cast<int>(ErrorNormKind::L2_surf_c2)];
  const double h1r = t.fitted_order[static_cast<int>(ErrorNormKind::L2_H1r_c2)];
  const bool pass =
      in_window(l2r, 1.8, 2.3) && in_window(surf, 1.8, 2.3) && in_window(h1r, 0.9, 1.3);
  report(2, "radial order (dr)", pass,
         fmt("fitted orders: L2(L2r) %.2f, c2surf %.2f (window [1.8, 2.3]); L2(H1r) %.2f "
             "(window [0.9, 1.3])",
             l2r, surf, h1r));
}

void criterion_3_temporal_order() {
  const ConvergenceTable t = convergence_study(load_study_config("study_tau.toml"));
  const double c1 = t.fitted_order[static_cast<int>(ErrorNormKind::H1_c1)];
  const double p1 = t.fitted_order[static_cast<int>(ErrorNormKind::H1_phi1)];
  const double p2 = t.fitted_order[static_cast<int>(ErrorNormKind::H1_phi2)];
  const double cs = t.fitted_order[static_cast<int>(ErrorNormKind::L2_surf_c2)];
  const bool pass = in_window(c1, 0.9, 1.4) && in_window(p1, 0.9, 1.4) &&
                    in_window(p2, 0.9, 1.4) && in_window(cs, 0.9, 1.4);
  report(3, "temporal order (tau)", pass,
         fmt("fitted orders: c1 %.2f, phi1 %.2f, phi2 %.2f, c2surf %.2f (window [0.9, 1.4])", c1,
             p1, p2, cs));
}

std::vector<BenchEntry> run_desk_bench() {
  ConfigMap cfg = load_config(std::string(DFN_CONFIG_DIR) + "/bench.toml");
  return benchmark_solvers(load_bench(cfg));
}

void criterion_4_solver_equivalence(const std::vector<BenchEntry>& entries) {
  const SolverConfig cfg; // the bench config keeps the defaults
  const double loosest = std::max({cfg.newton_abs_tol, cfg.newton_rel_tol, cfg.outer_rtol});
  double worst = 0.0;
  bool all_converged = true;
  for (const BenchEntry& e : entries) {
    all_converged = all_converged && e.converged;
    worst = std::max(worst, e.mismatch);
  }
  const bool pass = all_converged && worst <= 10.0 * loosest;
  report(4, "seven-solver fixed-point equivalence (20-step run)", pass,
         fmt("max pairwise final-state distance %.2e vs 10 x loosest tolerance %.2e", worst,
             10.0 * loosest));
}

void criterion_5_schur_correctness() {
  const Fixture f = make_fixture(desk_geometry(1, 1, 1), 4, 0.09);
  std::mt19937 rng(2024);
  AssemblyContext ctx = f.ctx(0.4);
  EvalPlan plan;
  plan.layout = BlockLayout::make(f.dofs, true, true, true, true);
  plan.sources = EvalSources::all_unknown();
  const Index pin = plan.layout.phi2;

  double worst = 0.0;
  bool pattern_ok = true;
  for (int trial = 0; trial < 20; ++trial) {
    const DiscreteState prev = random_state(f, rng, 0.5);
    const DiscreteState s = random_state(f, rng, 0.5);
    plan.prev = &prev;
    AssembledSystem sys = assemble_system(ctx, plan, pack_state(f.dofs, plan.layout, s), true);

    Matrix J = dense_full_jacobian(sys, plan.layout);
    Vector rhs = -sys.residual;
    J.row(pin).setZero();
    J.col(pin).setZero();
    J(pin, pin) = 1.0;
    rhs(pin) = 0.0;
    const Vector d_dense = J.fullPivLu().solve(rhs);

    std::set<std::pair<Index, Index>> macro_pattern;
    for (const Triplet& t : sys.macro) macro_pattern.insert({t.row(), t.col()});
    std::vector<Triplet> trips = sys.macro;
    const size_t base_count = trips.size();
    Vector rhs_macro = eliminate_surface_block(sys, plan.layout, trips);
    for (size_t i = base_count; i < trips.size(); ++i)
      pattern_ok = pattern_ok && macro_pattern.count({trips[i].row(), trips[i].col()}) == 1;

    fix_nullspace(trips, rhs_macro, pin, plan.layout.n_macro);
    SparseMat A(plan.layout.n_macro, plan.layout.n_macro);
    A.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<SparseMat, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(A);
    const Vector d_macro = lu.solve(rhs_macro);

    const double scale = std::max(1e-300, d_dense.cwiseAbs().maxCoeff());
    worst = std::max(
        worst, (d_macro - d_dense.head(plan.layout.n_macro)).cwiseAbs().maxCoeff() / scale);
    for (Index m = 0; m < f.dofs.n_surf; ++m) {
      double vdot = 0.0;
      for (const auto& [c, v] : sys.v_rows[m]) vdot += v * d_macro(c);
      const double ds = -(sys.residual(plan.layout.surf + m) + vdot) / sys.w_diag(m);
      worst = std::max(worst, std::abs(ds - d_dense(plan.layout.surf + m)) / scale);
    }
  }
  const bool pass = worst <= 1e-11 && pattern_ok;
  report(5, "Schur direction vs full block system, pattern containment", pass,
         fmt("max direction mismatch %.2e (tol 1e-11); pattern containment %s over 20 trials",
             worst, pattern_ok ? "holds" : "violated"));
}

void criterion_6_iteration_ranking(const std::vector<BenchEntry>& entries) {
  auto find = [&](SolverKind k) -> const BenchEntry& {
    for (const BenchEntry& e : entries)
      if (e.kind == k) return e;
    throw std::logic_error("bench entry missing");
  };
  const BenchEntry& fc2 = find(SolverKind::TwoDS_FC);
  const BenchEntry& fc = find(SolverKind::GSN_FC);
  const BenchEntry& eta1 = find(SolverKind::OneDS_Eta);
  const BenchEntry& eta2 = find(SolverKind::TwoDS_Eta);
  const BenchEntry& phi = find(SolverKind::GSN_Phi);
  const BenchEntry& macro = find(SolverKind::GSN_Macro);
  const BenchEntry& fd = find(SolverKind::GSN_FD);

  const bool ones = fc2.avg_outer == 1.0 && fc.avg_outer == 1.0;
  const bool eta_less = eta1.avg_outer < phi.avg_outer && eta1.avg_outer < macro.avg_outer &&
                        eta2.avg_outer < phi.avg_outer && eta2.avg_outer < macro.avg_outer;
  const bool fd_most = fd.avg_outer > phi.avg_outer && fd.avg_outer > macro.avg_outer &&
                       fd.avg_outer > eta1.avg_outer && fd.avg_outer > fc.avg_outer;
  const bool wall_order = fc2.wall_s < fd.wall_s;
  bool peak_largest = true;
  for (const BenchEntry& e : entries) peak_largest = peak_largest && fc.peak_order >= e.peak_order;

  const bool pass = ones && eta_less && fd_most && wall_order && peak_largest;
  report(6, "outer-iteration ranking, wall-time and matrix-order ordering", pass,
         fmt("outers: 2ds_fc %.2f, gsn_fc %.2f, eta %.2f/%.2f, phi %.2f, macro %.2f, fd %.2f; "
             "wall 2ds_fc %.3gs < gsn_fd %.3gs: %s; gsn_fc peak order %ld largest: %s",
             fc2.avg_outer, fc.avg_outer, eta2.avg_outer, eta1.avg_outer, phi.avg_outer,
             macro.avg_outer, fd.avg_outer, fc2.wall_s, fd.wall_s, wall_order ? "yes" : "no",
             static_cast<long>(fc.peak_order), peak_largest ? "yes" : "no"));
}

void criterion_7_jacobian_fidelity() {
  double worst = 0.0;
  auto check = [&](const Fixture& f, unsigned seed, int trials) {
    std::mt19937 rng(seed);
    AssemblyContext ctx = f.ctx(0.35);
    EvalPlan plan;
    plan.layout = BlockLayout::make(f.dofs, true, true, true, true);
    plan.sources = EvalSources::all_unknown();
    for (int trial = 0; trial < trials; ++trial) {
      const DiscreteState prev = random_state(f, rng, 0.5);
      const DiscreteState s = random_state(f, rng, 0.5);
      plan.prev = &prev;
      const Vector x = pack_state(f.dofs, plan.layout, s);
      const AssembledSystem sys = assemble_system(ctx, plan, x, true);
      const Matrix J = dense_full_jacobian(sys, plan.layout);
      for (Index j = 0; j < x.size(); ++j) {
        const double h = 1e-7 * std::max(1.0, std::abs(x(j)));
        Vector xp = x, xm = x;
        xp(j) += h;
        xm(j) -= h;
        const Vector col = (assemble_system(ctx, plan, xp, false).residual -
                            assemble_system(ctx, plan, xm, false).residual) /
                           (2.0 * h);
        const double cs = std::max(J.col(j).cwiseAbs().maxCoeff(), 1e-12);
        worst = std::max(worst, (col - J.col(j)).cwiseAbs().maxCoeff() / cs);
      }
    }
  };
  check(make_fixture(desk_geometry(2, 1, 2), 3, 0.08), 11, 4);
  check(make_fixture(desk_geometry_2d(2, 1, 2, 2), 3, 0.08), 13, 2);
  const bool pass = worst <= 1e-6;
  report(7, "Jacobian blocks vs central finite differences", pass,
         fmt("max column-relative mismatch %.2e (tol 1e-6), 1D and 2D randomized states", worst));
}

void criterion_8_conservation() {
  const Fixture f = make_fixture(desk_geometry(), 4, 0.1);
  SolverConfig cfg;
  SimulationPlan plan;
  plan.t_end = 2.0;
  plan.tau = 0.1;
  plan.solver = SolverKind::TwoDS_FC;
  std::vector<int> keep;
  for (int k = 1; k <= 20; ++k) keep.push_back(k);

  bool gamma_exact = true;
  for (int k = 1; k <= 20; ++k) {
    const BoundaryCurrent load =
        project_current(galvanostatic_load(f.mesh, f.ps.current.value_at(k * plan.tau)), f.mesh);
    gamma_exact = gamma_exact && gamma_integral(load, f.mesh) == 0.0;
  }

  const RunResult rr = run(plan, f.ps, f.mesh, f.dofs, f.rop_n, f.rop_p, cfg, keep);
  bool source_ok = !rr.failed;
  bool mass_ok = !rr.failed;
  double worst_source = 0.0, worst_mass = 0.0;
  if (!rr.failed) {
    const DiscreteState init = initialize_state(f.ps, f.mesh, f.dofs, f.rop_n, f.rop_p, cfg);
    const DiscreteState* prev = &init;
    const QuadratureRule rule = quadrature_rules(1, 4);
    for (const auto& [step, state] : rr.kept_states) {
      const double balance = discrete_source_balance(f.ps, f.mesh, f.rop_n, f.rop_p, state);
      const double scale = discrete_source_scale(f.ps, f.mesh, f.rop_n, f.rop_p, state);
      worst_source = std::max(worst_source, std::abs(balance) / std::max(scale, 1e-300));
      source_ok = source_ok && std::abs(balance) <= 1e-13 * scale;

      for (Index m = 0; m < f.dofs.n_surf; ++m) {
        const Index e = f.dofs.element_of_micro[m];
        const Element& el = f.mesh.elements[e];
        const RadialOperator& op = el.tag == SubdomainTag::Negative ? f.rop_n : f.rop_p;
        const double vol = f.mesh.element_volume(e);
        const double c2s = state.c2_surf(m);
        const double U = ocp_value(f.ps, el.tag, c2s);
        double Jint = 0.0;
        for (Index q = 0; q < rule.size(); ++q) {
          const double b0 = 1.0 - rule.points(q, 0), b1 = rule.points(q, 0);
          const double c1q = state.c1(el.v[0]) * b0 + state.c1(el.v[1]) * b1;
          const double p1q = state.phi1(el.v[0]) * b0 + state.phi1(el.v[1]) * b1;
          const double p2q = state.phi2(f.dofs.phi2_of_vertex[el.v[0]]) * b0 +
                             state.phi2(f.dofs.phi2_of_vertex[el.v[1]]) * b1;
          Jint += vol * rule.weights(q) * butler_volmer(f.ps, el.tag, c1q, c2s, p2q - p1q - U).J;
        }
        const double J_hi = plan.tau * std::pow(f.ps.Rs_of(el.tag), 2) / (f.ps.F * vol) * Jint;
        const double defect = op.M.multiply(state.c2[m] - prev->c2[m]).sum() + J_hi;
        const double mscale = std::abs(op.M.multiply(state.c2[m]).sum());
        worst_mass = std::max(worst_mass, std::abs(defect) / mscale);
        mass_ok = mass_ok && std::abs(defect) <= 1e-11 * mscale;
      }
      prev = &state;
    }
  }

  // zero-current fixed point
  Fixture f0 = make_fixture(desk_geometry(), 4, 0.1);
  f0.ps.current.values = {0.0};
  const DiscreteState init0 = initialize_state(f0.ps, f0.mesh, f0.dofs, f0.rop_n, f0.rop_p, cfg);
  SimulationPlan plan0 = plan;
  plan0.t_end = 1.0;
  const RunResult rr0 = run(plan0, f0.ps, f0.mesh, f0.dofs, f0.rop_n, f0.rop_p, cfg);
  const double loosest = std::max({cfg.newton_abs_tol, cfg.newton_rel_tol, cfg.outer_rtol});
  const double drift = rr0.failed ? 1.0 : state_distance(rr0.final_state, init0);
  const bool fixed_point_ok = !rr0.failed && drift <= 10.0 * loosest;

  const bool pass = gamma_exact && source_ok && mass_ok && fixed_point_ok;
  report(8, "conservation at every accepted step", pass,
         fmt("int_Gamma I* exactly 0: %s; worst |int a2 J|/scale %.2e (tol 1e-13); worst particle "
             "balance %.2e (tol 1e-11); zero-current drift %.2e (tol %.1e)",
             gamma_exact ? "yes" : "no", worst_source, worst_mass, drift, 10.0 * loosest));
}

void criterion_9_micro_oracles() {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> u(0.5, 5.0);
  double worst = 0.0;

  auto check_grid = [&](const RadialGrid& grid, double k2, double tau) {
    const RadialOperator op = build_radial_operator(grid, k2, tau);
    const Matrix A = op.A.dense();
    Vector eN = Vector::Zero(op.n_nodes());
    eN(op.n_nodes() - 1) = 1.0;
    const Vector y = A.fullPivLu().solve(eN);
    worst = std::max(worst, std::abs(op.surface_response - y(y.size() - 1)) /
                                std::abs(y(y.size() - 1)));
    const Vector hist = op.M.dense() * y;
    worst = std::max(worst, (op.history_map - hist).cwiseAbs().maxCoeff() /
                                hist.cwiseAbs().maxCoeff());
    Vector C_prev(op.n_nodes());
    for (Index i = 0; i < C_prev.size(); ++i) C_prev(i) = u(rng);
    const double J_hi = 0.05 * (u(rng) - 2.75);
    Vector rhs = op.M.dense() * C_prev;
    rhs(rhs.size() - 1) -= J_hi;
    const Vector dense = A.fullPivLu().solve(rhs);
    const Vector fast = backward_recover(op, C_prev, J_hi);
    worst = std::max(worst,
                     (fast - dense).cwiseAbs().maxCoeff() / dense.cwiseAbs().maxCoeff());
  };

  for (int trial = 0; trial < 10; ++trial) {
    const int n = 3 + trial;
    RadialGrid g;
    g.nodes.resize(n + 1);
    g.nodes(0) = 0.0;
    double r = 0.0;
    for (int i = 1; i <= n; ++i) {
      r += 0.05 + u(rng) * 0.2;
      g.nodes(i) = r;
    }
    check_grid(g, 0.02 + 0.1 * u(rng), 0.02 + 0.05 * u(rng));
  }
  // the clustered surface grid
  RadialGrid paper;
  paper.nodes.resize(11);
  paper.nodes(0) = 0.0;
  for (int n = 1; n <= 9; ++n) paper.nodes(n) = 1.0 - 1.0 / (1 << n);
  paper.nodes(10) = 1.0;
  check_grid(paper, 0.05, 0.1);

  const bool pass = worst <= 1e-12;
  report(9, "micro kernels vs dense factorization oracles", pass,
         fmt("max relative mismatch %.2e (tol 1e-12), randomized grids and the clustered grid",
             worst));
}

} // namespace

int main() {
  std::printf("acceptance suite\n");
  try {
    criterion_1_spatial_order();
    criterion_2_radial_order();
    criterion_3_temporal_order();
    const std::vector<BenchEntry> bench = run_desk_bench();
    criterion_4_solver_equivalence(bench);
    criterion_5_schur_correctness();
    criterion_6_iteration_ranking(bench);
    criterion_7_jacobian_fidelity();
    criterion_8_conservation();
    criterion_9_micro_oracles();
  } catch (const std::exception& e) {
    std::printf("[FAIL] acceptance suite aborted: %s\n", e.what());
    return 1;
  }
  if (g_failures == 0) {
    std::printf("all %d criteria passed\n", 9);
    return 0;
  }
  std::printf("%d criterion(s) failed\n", g_failures);
  return 1;
}
