#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_helpers.hpp"

#include <cmath>

using namespace dfn;
using namespace dfn::testing;

namespace {

struct GridPack {
  CellMesh mesh;
  RadialGrid rn, rp;
  DofMap dofs;
};

GridPack grids_at(const ParameterSet& ps, int h_level, int dr_level) {
  GridPack g;
  g.mesh = refine_uniform(build_laminate(desk_geometry(4, 1, 4)), h_level);
  RadialSpec rs;
  rs.uniform_intervals = 2;
  g.rn = refine_radial(build_radial(ps, SubdomainTag::Negative, rs), dr_level);
  g.rp = refine_radial(build_radial(ps, SubdomainTag::Positive, rs), dr_level);
  g.dofs = build_dofmap(g.mesh, g.rn, g.rp);
  return g;
}

DiscreteState zero_state(const ParameterSet& ps, const GridPack& g) {
  DiscreteState s;
  s.c1 = Vector::Zero(g.dofs.n_c1);
  s.phi1 = Vector::Zero(g.dofs.n_phi1);
  s.phi2 = Vector::Zero(g.dofs.n_phi2);
  for (Index m = 0; m < g.dofs.n_surf; ++m)
    s.c2.push_back(Vector::Constant(g.dofs.micro_nodes[m], 1.0)); // harmless positive filler
  (void)ps;
  return s;
}

} // namespace

TEST_CASE("identical states give zero norms") {
  const ParameterSet ps = desk_params();
  const GridPack gg = grids_at(ps, 0, 0);
  DiscreteState s = zero_state(ps, gg);
  s.c1.setConstant(3.0);
  StateOnGrid a{&gg.mesh, &gg.dofs, &gg.rn, &gg.rp, &s};
  const NormValues n = error_norms(a, a);
  for (double v : n) CHECK(v <= 1e-14 * 3.0); // roundoff of two evaluation paths
}

TEST_CASE("single-hat perturbation matches the hand-computed H1 energy") {
  const ParameterSet ps = desk_params();
  const GridPack g = grids_at(ps, 1, 0);
  DiscreteState base = zero_state(ps, g);
  DiscreteState bumped = base;
  const double delta = 0.37;
  // pick an interior vertex away from the subdomain interfaces
  const Index v = 2;
  bumped.c1(v) += delta;
  // hat-function energy on a 1D mesh: ||phi||_L2^2 = (h1+h2)/3, |phi|_H1^2 = 1/h1 + 1/h2
  double h1 = 0, h2 = 0;
  for (Index e = 0; e < g.mesh.n_elements(); ++e) {
    const Element& el = g.mesh.elements[e];
    if (el.v[1] == v) h1 = g.mesh.element_volume(e);
    if (el.v[0] == v) h2 = g.mesh.element_volume(e);
  }
  REQUIRE(h1 > 0);
  REQUIRE(h2 > 0);
  const double expect = std::sqrt(delta * delta * ((h1 + h2) / 3.0 + 1.0 / h1 + 1.0 / h2));
  StateOnGrid a{&g.mesh, &g.dofs, &g.rn, &g.rp, &bumped};
  StateOnGrid b{&g.mesh, &g.dofs, &g.rn, &g.rp, &base};
  const NormValues n = error_norms(a, b);
  CHECK(n[static_cast<int>(ErrorNormKind::H1_c1)] == doctest::Approx(expect).epsilon(1e-13));
  CHECK(n[static_cast<int>(ErrorNormKind::H1_phi1)] == 0.0);
}

TEST_CASE("norms of an injected linear field match the symbolic values") {
  const ParameterSet ps = desk_params();
  const GridPack coarse = grids_at(ps, 0, 0);
  const GridPack fine = grids_at(ps, 2, 1);
  DiscreteState sc = zero_state(ps, coarse);
  DiscreteState sf = zero_state(ps, fine);
  // c1(x) = a + b x is represented exactly in both spaces
  const double a = 2.0, b = 1.5;
  for (Index i = 0; i < coarse.mesh.n_vertices(); ++i)
    sc.c1(i) = a + b * coarse.mesh.vertices(i, 0);
  StateOnGrid A{&coarse.mesh, &coarse.dofs, &coarse.rn, &coarse.rp, &sc};
  StateOnGrid B{&fine.mesh, &fine.dofs, &fine.rn, &fine.rp, &sf};
  const double L = 2.25; // domain length
  const double l2_sq = a * a * L + a * b * L * L + b * b * L * L * L / 3.0;
  const double h1 = std::sqrt(l2_sq + b * b * L);
  const NormValues n = error_norms(A, B);
  CHECK(n[static_cast<int>(ErrorNormKind::H1_c1)] == doctest::Approx(h1).epsilon(1e-13));
}

TEST_CASE("radial norms of a constant particle field match closed forms") {
  const ParameterSet ps = desk_params(); // Rs = 1
  const GridPack coarse = grids_at(ps, 0, 0);
  const GridPack fine = grids_at(ps, 1, 2);
  DiscreteState sc = zero_state(ps, coarse);
  DiscreteState sf = zero_state(ps, fine);
  for (Index m = 0; m < coarse.dofs.n_surf; ++m) sc.c2[m].setConstant(3.0);
  for (Index m = 0; m < fine.dofs.n_surf; ++m) sf.c2[m].setConstant(1.0);
  StateOnGrid A{&coarse.mesh, &coarse.dofs, &coarse.rn, &coarse.rp, &sc};
  StateOnGrid B{&fine.mesh, &fine.dofs, &fine.rn, &fine.rp, &sf};
  const NormValues n = error_norms(A, B);
  const double omega2 = 2.0;        // |Omega_n| + |Omega_p|
  const double diff = 2.0;          // 3 - 1
  const double l2r_sq = diff * diff / 3.0; // int_0^1 r^2 dr
  CHECK(n[static_cast<int>(ErrorNormKind::L2_surf_c2)] ==
        doctest::Approx(std::sqrt(omega2 * diff * diff)).epsilon(1e-13));
  CHECK(n[static_cast<int>(ErrorNormKind::L2_L2r_c2)] ==
        doctest::Approx(std::sqrt(omega2 * l2r_sq)).epsilon(1e-13));
  CHECK(n[static_cast<int>(ErrorNormKind::L2_H1r_c2)] ==
        doctest::Approx(std::sqrt(omega2 * l2r_sq)).epsilon(1e-13)); // derivative part is zero
}

TEST_CASE("error_norms is symmetric over a common space") {
  const ParameterSet ps = desk_params();
  const GridPack g = grids_at(ps, 1, 1);
  std::mt19937 rng(8);
  DiscreteState a = zero_state(ps, g);
  DiscreteState b = zero_state(ps, g);
  std::uniform_real_distribution<double> u(1.0, 2.0);
  for (Index i = 0; i < a.c1.size(); ++i) {
    a.c1(i) = u(rng);
    b.c1(i) = u(rng);
    a.phi1(i) = u(rng);
    b.phi1(i) = u(rng);
  }
  StateOnGrid A{&g.mesh, &g.dofs, &g.rn, &g.rp, &a};
  StateOnGrid B{&g.mesh, &g.dofs, &g.rn, &g.rp, &b};
  const NormValues ab = error_norms(A, B);
  const NormValues ba = error_norms(B, A);
  for (int i = 0; i < kNormCount; ++i) CHECK(ab[i] == doctest::Approx(ba[i]).epsilon(1e-13));
}

TEST_CASE("non-nested inputs are rejected") {
  const ParameterSet ps = desk_params();
  const GridPack g = grids_at(ps, 0, 0);
  GeometrySpec shifted = desk_geometry(4, 1, 4);
  shifted.len_n = 0.5; // different geometry: tags and containment disagree
  GridPack other;
  other.mesh = build_laminate(shifted);
  other.rn = g.rn;
  other.rp = g.rp;
  other.dofs = build_dofmap(other.mesh, other.rn, other.rp);
  DiscreteState sa = zero_state(ps, g);
  DiscreteState sb = zero_state(ps, other);
  StateOnGrid A{&g.mesh, &g.dofs, &g.rn, &g.rp, &sa};
  StateOnGrid B{&other.mesh, &other.dofs, &other.rn, &other.rp, &sb};
  CHECK_THROWS_AS(error_norms(B, A), ValidationError);
}

TEST_CASE("fit_order recovers a synthetic rate") {
  std::vector<std::pair<int, double>> pts;
  for (int l = 1; l <= 4; ++l) pts.emplace_back(l, 3.0 * std::pow(2.0, -1.7 * l));
  CHECK(fit_order(pts) == doctest::Approx(1.7).epsilon(1e-12));
  CHECK_THROWS_AS(fit_order({{1, 0.5}}), ValidationError);
}

TEST_CASE("convergence_study on the tau axis (smoke, desk scale)") {
  StudySetup st;
  st.ps = desk_params();
  st.geometry = desk_geometry(4, 1, 4);
  st.radial_n.uniform_intervals = 4;
  st.radial_p.uniform_intervals = 4;
  st.solver = SolverKind::TwoDS_FC;
  st.axis = StudyAxis::Tau;
  st.levels = {0, 1, 2};
  st.ref_extra = 2;
  st.t_end = 1.0;
  st.tau_ref = 0.25; // coarsest tested step
  st.fixed_h_level = 1;
  st.fixed_dr_level = 1;
  const ConvergenceTable table = convergence_study(st);
  REQUIRE(table.rows.size() == 3);
  for (int n = 0; n < kNormCount; ++n) {
    CHECK(table.fitted_order[n] > 0.8);
    CHECK(table.fitted_order[n] < 1.5);
    CHECK(table.order_drop_guard[n] < 0.15); // regression guard on a healthy study
  }
  // errors shrink with the level
  for (int n = 0; n < kNormCount; ++n) {
    CHECK(table.rows[0].errors[n] > table.rows[1].errors[n]);
    CHECK(table.rows[1].errors[n] > table.rows[2].errors[n]);
  }
}

TEST_CASE("a failed level run aborts the study with diagnostics") {
  StudySetup st;
  st.ps = desk_params();
  st.geometry = desk_geometry(4, 1, 4);
  st.radial_n.uniform_intervals = 4;
  st.radial_p.uniform_intervals = 4;
  st.solver = SolverKind::GSN_FD;
  st.solver_cfg.max_outer = 2;
  st.axis = StudyAxis::Tau;
  st.levels = {0, 1};
  st.t_end = 0.5;
  st.tau_ref = 0.25;
  CHECK_THROWS_WITH_AS(convergence_study(st), doctest::Contains("run failed"), SolverError);
}

TEST_CASE("benchmark harness records counts and flags DNF kinds") {
  BenchSetup b;
  b.ps = desk_params();
  b.geometry = desk_geometry(4, 1, 4);
  b.radial_n.uniform_intervals = 4;
  b.radial_p.uniform_intervals = 4;
  b.t_end = 0.3;
  b.tau = 0.1;
  b.kinds = {SolverKind::TwoDS_FC, SolverKind::GSN_FD, SolverKind::GSN_FC};
  b.solver_cfg.max_outer = 2; // sinks GSN-FD; the single-Newton kinds never loop
  const std::vector<BenchEntry> entries = benchmark_solvers(b);
  REQUIRE(entries.size() == 3);
  CHECK(entries[0].converged);
  CHECK(!entries[1].converged);
  CHECK(entries[1].error.find("max_outer") != std::string::npos);
  CHECK(entries[2].converged);
  CHECK(entries[2].mismatch <= 1e-9);
  CHECK(entries[0].avg_outer == doctest::Approx(1.0));
}
