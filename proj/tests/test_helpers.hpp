#pragma once

#include "dfn/setup.hpp"

#include <random>

namespace dfn::testing {

/// In-code twin of configs/desk.toml (kept independent of the file so unit
/// tests need no filesystem).
inline ParameterSet desk_params() {
  ParameterSet ps;
  ps.F = 2.0;
  ps.R = 1.0;
  ps.T0 = 0.1;
  ps.t_plus = 0.4;

  ScalarClosure kappa;
  kappa.family = ScalarClosure::Family::Polynomial;
  kappa.x_ref = 5.0;
  kappa.coeffs = {0.2, 0.5};
  ps.kappa1 = {kappa, kappa, kappa};

  ps.eps1 = {0.3, 1.0, 0.3};
  ps.k1 = {0.08, 0.08, 0.08};
  ps.c10 = {5.0, 5.0, 5.0};

  ps.sigma = {10.0, 10.0};
  ps.k2 = {0.05, 0.05};
  ps.a1 = {1.0, 1.0};
  ps.a2 = {1.0, 1.0};
  ps.Rs = {1.0, 1.0};
  ps.c2max = {10.0, 10.0};
  ps.c20 = {8.0, 4.0};
  ps.bv_k = {0.03, 0.03};
  ps.alpha_a = {0.5, 0.5};
  ps.alpha_c = {0.5, 0.5};

  ScalarClosure ocp_n;
  ocp_n.family = ScalarClosure::Family::ExpTanh;
  ocp_n.b0 = 0.1;
  ocp_n.b1 = -0.05;
  ocp_n.exp_terms = {{0.8, -8.0}};
  ScalarClosure ocp_p;
  ocp_p.family = ScalarClosure::Family::ExpTanh;
  ocp_p.b0 = 3.8;
  ocp_p.b1 = -1.0;
  ocp_p.tanh_terms = {{-0.3, 8.0, 0.5}};
  ps.ocp = {ocp_n, ocp_p};

  ps.current.times = {0.0};
  ps.current.values = {0.5};
  return ps;
}

inline GeometrySpec desk_geometry(int nx_n = 8, int nx_s = 2, int nx_p = 8) {
  GeometrySpec g;
  g.dim = 1;
  g.len_n = 1.0;
  g.len_s = 0.25;
  g.len_p = 1.0;
  g.nx_n = nx_n;
  g.nx_s = nx_s;
  g.nx_p = nx_p;
  return g;
}

inline GeometrySpec desk_geometry_2d(int nx_n, int nx_s, int nx_p, int ny) {
  GeometrySpec g = desk_geometry(nx_n, nx_s, nx_p);
  g.dim = 2;
  g.height = 0.75;
  g.ny = ny;
  return g;
}

/// Everything needed to assemble on a mesh: grids, dofmap, radial operators.
struct Fixture {
  ParameterSet ps;
  CellMesh mesh;
  RadialGrid rn, rp;
  DofMap dofs;
  RadialOperator rop_n, rop_p;
  double tau;

  AssemblyContext ctx(double I_value) const {
    AssemblyContext c;
    c.ps = &ps;
    c.mesh = &mesh;
    c.dofs = &dofs;
    c.rop[0] = &rop_n;
    c.rop[1] = &rop_p;
    c.tau = tau;
    c.current = galvanostatic_load(mesh, I_value);
    return c;
  }
};

inline Fixture make_fixture(const GeometrySpec& g, int radial_intervals, double tau,
                            ParameterSet ps = desk_params()) {
  Fixture f{std::move(ps), build_laminate(g), {}, {}, {}, {}, {}, tau};
  RadialSpec rs;
  rs.uniform_intervals = radial_intervals;
  f.rn = build_radial(f.ps, SubdomainTag::Negative, rs);
  f.rp = build_radial(f.ps, SubdomainTag::Positive, rs);
  f.dofs = build_dofmap(f.mesh, f.rn, f.rp);
  f.rop_n = build_radial_operator(f.rn, f.ps.k2_of(SubdomainTag::Negative), tau);
  f.rop_p = build_radial_operator(f.rp, f.ps.k2_of(SubdomainTag::Positive), tau);
  return f;
}

/// Constant-field equilibrium state: c1 = c10, c2 = c20, eta = 0 potentials.
inline DiscreteState equilibrium_state(const Fixture& f) {
  DiscreteState s;
  s.c1 = Vector::Constant(f.dofs.n_c1, f.ps.c10_of(SubdomainTag::Separator));
  s.phi1 = Vector::Zero(f.dofs.n_phi1);
  s.phi2.resize(f.dofs.n_phi2);
  s.c2.resize(f.dofs.n_surf);
  for (Index m = 0; m < f.dofs.n_surf; ++m) {
    const Element& el = f.mesh.elements[f.dofs.element_of_micro[m]];
    const double c20 = f.ps.c20_of(el.tag);
    s.c2[m] = Vector::Constant(f.dofs.micro_nodes[m], c20);
    for (int i = 0; i < f.mesh.verts_per_element(); ++i)
      s.phi2(f.dofs.phi2_of_vertex[el.v[i]]) = ocp_value(f.ps, el.tag, c20);
  }
  return s;
}

/// Random admissible state near equilibrium: bounded concentrations and
/// near-OCP potentials (keeps the Butler-Volmer exponentials tame).
inline DiscreteState random_state(const Fixture& f, std::mt19937& rng, double spread = 1.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DiscreteState s = equilibrium_state(f);
  for (Index i = 0; i < s.c1.size(); ++i) s.c1(i) *= 1.0 + 0.15 * spread * u(rng);
  for (Index i = 0; i < s.phi1.size(); ++i) s.phi1(i) += 0.04 * spread * u(rng);
  for (Index i = 0; i < s.phi2.size(); ++i) s.phi2(i) += 0.04 * spread * u(rng);
  for (Index m = 0; m < f.dofs.n_surf; ++m) {
    const Element& el = f.mesh.elements[f.dofs.element_of_micro[m]];
    const double cmax = f.ps.c2max_of(el.tag);
    for (Index i = 0; i < s.c2[m].size(); ++i)
      s.c2[m](i) = cmax * (0.45 + 0.25 * spread * u(rng));
  }
  return s;
}

/// Dense matrix of the full reduced system [J_macro U; V D] from an
/// AssembledSystem (test oracle path).
inline Matrix dense_full_jacobian(const AssembledSystem& sys, const BlockLayout& L) {
  Matrix J = Matrix::Zero(L.size, L.size);
  for (const Triplet& t : sys.macro) J(t.row(), t.col()) += t.value();
  for (Index m = 0; m < sys.w_diag.size(); ++m) {
    const Index srow = L.surf + m;
    J(srow, srow) += sys.w_diag(m);
    for (const auto& [c, v] : sys.v_rows[m]) J(srow, c) += v;
    for (const auto& [r, v] : sys.u_cols[m]) J(r, srow) += v;
  }
  return J;
}

} // namespace dfn::testing
