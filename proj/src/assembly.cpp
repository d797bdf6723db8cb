#include "dfn/assembly.hpp"

#include <cmath>

namespace dfn {

Index DofMap::n_micro_total() const {
  Index n = 0;
  for (Index m : micro_nodes) n += m;
  return n;
}

DofMap build_dofmap(const CellMesh& mesh, const RadialGrid& radial_n, const RadialGrid& radial_p) {
  DofMap d;
  d.n_c1 = mesh.n_vertices();
  d.n_phi1 = mesh.n_vertices();
  d.phi2_of_vertex.assign(mesh.n_vertices(), -1);
  d.micro_of_element.assign(mesh.elements.size(), -1);

  for (Index e = 0; e < mesh.n_elements(); ++e) {
    const Element& el = mesh.elements[e];
    if (!is_electrode(el.tag)) continue;
    for (int i = 0; i < mesh.verts_per_element(); ++i) d.phi2_of_vertex[el.v[i]] = 0;
    d.micro_of_element[e] = static_cast<Index>(d.element_of_micro.size());
    d.element_of_micro.push_back(e);
    d.micro_nodes.push_back(el.tag == SubdomainTag::Negative ? radial_n.nodes.size()
                                                             : radial_p.nodes.size());
  }
  for (Index v = 0; v < mesh.n_vertices(); ++v) {
    if (d.phi2_of_vertex[v] == 0) {
      d.phi2_of_vertex[v] = d.n_phi2++;
      d.vertex_of_phi2.push_back(v);
    } else {
      d.phi2_of_vertex[v] = -1;
    }
  }
  d.n_surf = static_cast<Index>(d.element_of_micro.size());
  return d;
}

BlockLayout BlockLayout::make(const DofMap& dofs, bool c1, bool phi1, bool phi2, bool surf) {
  BlockLayout L;
  Index off = 0;
  if (c1) {
    L.has_c1 = true;
    L.c1 = off;
    off += dofs.n_c1;
  }
  if (phi1) {
    L.has_phi1 = true;
    L.phi1 = off;
    off += dofs.n_phi1;
  }
  if (phi2) {
    L.has_phi2 = true;
    L.phi2 = off;
    off += dofs.n_phi2;
  }
  L.n_macro = off;
  if (surf) {
    L.has_surf = true;
    L.surf = off;
    off += dofs.n_surf;
  }
  L.size = off;
  return L;
}

Vector pack_state(const DofMap& dofs, const BlockLayout& L, const DiscreteState& s) {
  Vector x = Vector::Zero(L.size);
  if (L.has_c1) x.segment(L.c1, dofs.n_c1) = s.c1;
  if (L.has_phi1) x.segment(L.phi1, dofs.n_phi1) = s.phi1;
  if (L.has_phi2) x.segment(L.phi2, dofs.n_phi2) = s.phi2;
  if (L.has_surf)
    for (Index m = 0; m < dofs.n_surf; ++m) x(L.surf + m) = s.c2_surf(m);
  return x;
}

void unpack_state(const DofMap& dofs, const BlockLayout& L, const Vector& x, DiscreteState& s) {
  if (L.has_c1) s.c1 = x.segment(L.c1, dofs.n_c1);
  if (L.has_phi1) s.phi1 = x.segment(L.phi1, dofs.n_phi1);
  if (L.has_phi2) s.phi2 = x.segment(L.phi2, dofs.n_phi2);
  if (L.has_surf)
    for (Index m = 0; m < dofs.n_surf; ++m) s.c2[m](s.c2[m].size() - 1) = x(L.surf + m);
}

namespace {

struct ElemGeom {
  int nv = 2;
  double detJ = 0.0;
  double volume = 0.0;
  std::array<Index, 3> verts{-1, -1, -1};
  double grads[3][2] = {};
};

ElemGeom element_geometry(const CellMesh& mesh, Index e) {
  ElemGeom g;
  const Element& el = mesh.elements[e];
  g.verts = el.v;
  if (mesh.dim == 1) {
    g.nv = 2;
    const double x0 = mesh.vertices(el.v[0], 0);
    const double x1 = mesh.vertices(el.v[1], 0);
    const double h = x1 - x0;
    g.detJ = h;
    g.volume = h;
    g.grads[0][0] = -1.0 / h;
    g.grads[1][0] = 1.0 / h;
    return g;
  }
  g.nv = 3;
  const Vector2 a = mesh.vertices.row(el.v[0]);
  const Vector2 b = mesh.vertices.row(el.v[1]);
  const Vector2 c = mesh.vertices.row(el.v[2]);
  const double j00 = b.x() - a.x(), j01 = c.x() - a.x();
  const double j10 = b.y() - a.y(), j11 = c.y() - a.y();
  const double det = j00 * j11 - j01 * j10;
  g.detJ = std::abs(det);
  g.volume = 0.5 * g.detJ;
  // physical gradients: J^{-T} times reference gradients (-1,-1), (1,0), (0,1)
  const double i00 = j11 / det, i01 = -j10 / det;
  const double i10 = -j01 / det, i11 = j00 / det;
  g.grads[0][0] = -(i00 + i01);
  g.grads[0][1] = -(i10 + i11);
  g.grads[1][0] = i00;
  g.grads[1][1] = i10;
  g.grads[2][0] = i01;
  g.grads[2][1] = i11;
  return g;
}

void basis_values(int dim, const QuadratureRule& rule, Index q, double* b) {
  if (dim == 1) {
    const double xi = rule.points(q, 0);
    b[0] = 1.0 - xi;
    b[1] = xi;
  } else {
    const double xi = rule.points(q, 0), et = rule.points(q, 1);
    b[0] = 1.0 - xi - et;
    b[1] = xi;
    b[2] = et;
  }
}

double dot_grad(const ElemGeom& g, int i, int j, int dim) {
  double s = 0.0;
  for (int d = 0; d < dim; ++d) s += g.grads[i][d] * g.grads[j][d];
  return s;
}

struct ResolvedFields {
  const double* c1_J = nullptr;      // vertex-indexed
  const double* c1_coeff = nullptr;  // kappa arguments and ln denominator
  const double* c1_grad = nullptr;   // ln-term gradient argument
  const double* c1_unknown = nullptr; // mass/stiffness unknown (x), when c1 active
  const double* phi1 = nullptr;
  const double* phi2 = nullptr;      // phi2-dof indexed
  bool emit_c1_J = false, emit_coeff_value = false, emit_coeff_grad = false;
  bool emit_phi1 = false, emit_phi2 = false, emit_c2s_J = false, emit_c2s_U = false;
};

} // namespace

AssembledSystem assemble_system(const AssemblyContext& ctx, const EvalPlan& plan, const Vector& x,
                                bool want_jacobian) {
  const CellMesh& mesh = *ctx.mesh;
  const DofMap& dofs = *ctx.dofs;
  const ParameterSet& ps = *ctx.ps;
  const BlockLayout& L = plan.layout;
  const EvalSources& src = plan.sources;
  const DiscreteState* frozen = plan.frozen;
  const DiscreteState* frozen_u = plan.frozen_u ? plan.frozen_u : plan.frozen;

  auto need_frozen = [&](ArgSource s) { return s == ArgSource::Frozen; };
  if ((need_frozen(src.c1_in_J) || need_frozen(src.c1_in_coeff) || need_frozen(src.phi1) ||
       need_frozen(src.phi2) || need_frozen(src.c2s_in_J)) &&
      frozen == nullptr)
    throw std::logic_error("assemble_system: frozen state required");
  if (need_frozen(src.c2s_in_U) && frozen_u == nullptr)
    throw std::logic_error("assemble_system: frozen_u state required");
  if ((src.c1_in_J == ArgSource::Unknown && !L.has_c1) ||
      (src.phi1 == ArgSource::Unknown && !L.has_phi1) ||
      (src.phi2 == ArgSource::Unknown && !L.has_phi2) ||
      ((src.c2s_in_J == ArgSource::Unknown || src.c2s_in_U == ArgSource::Unknown) && !L.has_surf))
    throw std::logic_error("assemble_system: unknown argument without its active block");
  if (L.has_c1 && plan.prev == nullptr)
    throw std::logic_error("assemble_system: prev state required for the c1 mass term");
  if (L.has_surf && plan.prev == nullptr)
    throw std::logic_error("assemble_system: prev state required for surface rows");

  ResolvedFields f;
  f.c1_unknown = L.has_c1 ? x.data() + L.c1 : nullptr;
  f.c1_J = (src.c1_in_J == ArgSource::Unknown) ? f.c1_unknown : frozen->c1.data();
  const double* coeff_base =
      (src.c1_in_coeff == ArgSource::Unknown) ? (L.has_c1 ? f.c1_unknown : nullptr) : frozen->c1.data();
  if (src.c1_in_coeff == ArgSource::Unknown && coeff_base == nullptr)
    throw std::logic_error("assemble_system: c1_in_coeff unknown without c1 block");
  if (plan.hooks.freeze_coefficients) {
    f.c1_coeff = frozen->c1.data();
    f.c1_grad = L.has_c1 ? f.c1_unknown : frozen->c1.data();
    f.emit_coeff_value = false;
    f.emit_coeff_grad = L.has_c1;
  } else {
    f.c1_coeff = coeff_base;
    f.c1_grad = coeff_base;
    f.emit_coeff_value = (src.c1_in_coeff == ArgSource::Unknown);
    f.emit_coeff_grad = (src.c1_in_coeff == ArgSource::Unknown);
  }
  f.phi1 = (src.phi1 == ArgSource::Unknown) ? x.data() + L.phi1 : frozen->phi1.data();
  f.phi2 = (src.phi2 == ArgSource::Unknown) ? x.data() + L.phi2 : frozen->phi2.data();
  f.emit_c1_J = (src.c1_in_J == ArgSource::Unknown);
  f.emit_phi1 = (src.phi1 == ArgSource::Unknown);
  f.emit_phi2 = (src.phi2 == ArgSource::Unknown);
  f.emit_c2s_J = (src.c2s_in_J == ArgSource::Unknown);
  f.emit_c2s_U = (src.c2s_in_U == ArgSource::Unknown);

  auto c2s_J_of = [&](Index slot) {
    return (src.c2s_in_J == ArgSource::Unknown) ? x(L.surf + slot) : frozen->c2_surf(slot);
  };
  auto c2s_U_of = [&](Index slot) {
    return (src.c2s_in_U == ArgSource::Unknown) ? x(L.surf + slot) : frozen_u->c2_surf(slot);
  };

  AssembledSystem out;
  out.residual = Vector::Zero(L.size);
  if (L.has_surf && want_jacobian) {
    out.u_cols.resize(dofs.n_surf);
    out.v_rows.resize(dofs.n_surf);
    out.w_diag = Vector::Zero(dofs.n_surf);
  } else if (L.has_surf) {
    out.w_diag = Vector::Zero(dofs.n_surf);
  }

  const QuadratureRule q_lin = quadrature_rules(mesh.dim, 2);
  const QuadratureRule q_chem = quadrature_rules(mesh.dim, 4);
  const int dim = mesh.dim;

  for (Index e = 0; e < mesh.n_elements(); ++e) {
    const Element& el = mesh.elements[e];
    const ElemGeom g = element_geometry(mesh, e);
    const int nv = g.nv;
    const SubdomainTag tag = el.tag;
    const bool electrode = is_electrode(tag);
    const Index slot = electrode ? dofs.micro_of_element[e] : -1;

    Index lc1[3] = {-1, -1, -1}, lp1[3] = {-1, -1, -1}, lp2[3] = {-1, -1, -1};
    for (int i = 0; i < nv; ++i) {
      const Index v = g.verts[i];
      if (L.has_c1) lc1[i] = L.c1 + v;
      if (L.has_phi1) lp1[i] = L.phi1 + v;
      if (L.has_phi2 && dofs.phi2_of_vertex[v] >= 0) lp2[i] = L.phi2 + dofs.phi2_of_vertex[v];
    }

    // --- c1 mass and k1 stiffness (linear-coefficient terms) ---
    if (L.has_c1) {
      const double eps_tau = ps.eps1_of(tag) / ctx.tau;
      const double k1 = ps.k1_of(tag);
      double b[3];
      for (Index q = 0; q < q_lin.size(); ++q) {
        basis_values(dim, q_lin, q, b);
        const double wq = q_lin.weights(q) * g.detJ;
        double c1q = 0.0, c1pq = 0.0;
        for (int i = 0; i < nv; ++i) {
          c1q += f.c1_unknown[g.verts[i]] * b[i];
          c1pq += plan.prev->c1(g.verts[i]) * b[i];
        }
        for (int i = 0; i < nv; ++i) {
          out.residual(lc1[i]) += wq * eps_tau * (c1q - c1pq) * b[i];
          if (want_jacobian)
            for (int j = 0; j < nv; ++j)
              out.macro.emplace_back(lc1[i], lc1[j], wq * eps_tau * b[j] * b[i]);
        }
      }
      double gc1[2] = {0, 0};
      for (int i = 0; i < nv; ++i)
        for (int d = 0; d < dim; ++d) gc1[d] += f.c1_unknown[g.verts[i]] * g.grads[i][d];
      for (int i = 0; i < nv; ++i) {
        double gi_dot = 0.0;
        for (int d = 0; d < dim; ++d) gi_dot += gc1[d] * g.grads[i][d];
        out.residual(lc1[i]) += g.volume * k1 * gi_dot;
        if (want_jacobian)
          for (int j = 0; j < nv; ++j)
            out.macro.emplace_back(lc1[i], lc1[j], g.volume * k1 * dot_grad(g, i, j, dim));
      }
    }

    // --- sigma stiffness on Omega2 ---
    if (L.has_phi2 && electrode) {
      const double sg = ps.sigma_of(tag);
      double gp2[2] = {0, 0};
      for (int i = 0; i < nv; ++i)
        for (int d = 0; d < dim; ++d) gp2[d] += f.phi2[dofs.phi2_of_vertex[g.verts[i]]] * g.grads[i][d];
      for (int i = 0; i < nv; ++i) {
        double gi_dot = 0.0;
        for (int d = 0; d < dim; ++d) gi_dot += gp2[d] * g.grads[i][d];
        out.residual(lp2[i]) += g.volume * sg * gi_dot;
        if (want_jacobian)
          for (int j = 0; j < nv; ++j)
            out.macro.emplace_back(lp2[i], lp2[j], g.volume * sg * dot_grad(g, i, j, dim));
      }
    }

    // --- kappa1 stiffness and kappa2 grad ln(c1) term ---
    if (L.has_phi1) {
      double gp1[2] = {0, 0};
      for (int i = 0; i < nv; ++i)
        for (int d = 0; d < dim; ++d) gp1[d] += f.phi1[g.verts[i]] * g.grads[i][d];
      double gc1[2] = {0, 0};
      for (int i = 0; i < nv; ++i)
        for (int d = 0; d < dim; ++d) gc1[d] += f.c1_grad[g.verts[i]] * g.grads[i][d];

      double Ik1 = 0.0, S1 = 0.0;
      double Ik1d[3] = {0, 0, 0}, S1d[3] = {0, 0, 0};
      double b[3];
      try {
        for (Index q = 0; q < q_chem.size(); ++q) {
          basis_values(dim, q_chem, q, b);
          const double wq = q_chem.weights(q) * g.detJ;
          double c1c = 0.0;
          for (int i = 0; i < nv; ++i) c1c += f.c1_coeff[g.verts[i]] * b[i];
          const CoeffEval k1v = kappa1_eval(ps, tag, c1c);
          Ik1 += wq * k1v.value;
          if (want_jacobian && f.emit_coeff_value)
            for (int j = 0; j < nv; ++j) Ik1d[j] += wq * k1v.dc1 * b[j];
          if (!plan.hooks.drop_ln_term) {
            const CoeffEval k2v = kappa2_eval(ps, tag, c1c);
            S1 += wq * k2v.value / c1c;
            if (want_jacobian && f.emit_coeff_value)
              for (int j = 0; j < nv; ++j)
                S1d[j] += wq * (k2v.dc1 / c1c - k2v.value / (c1c * c1c)) * b[j];
          }
        }
      } catch (const ChemistryDomainError& err) {
        throw ChemistryDomainError("element " + std::to_string(e) + " (c1 coefficient): " + err.what());
      }

      for (int i = 0; i < nv; ++i) {
        double gp1_gi = 0.0, gc1_gi = 0.0;
        for (int d = 0; d < dim; ++d) {
          gp1_gi += gp1[d] * g.grads[i][d];
          gc1_gi += gc1[d] * g.grads[i][d];
        }
        out.residual(lp1[i]) += Ik1 * gp1_gi - S1 * gc1_gi;
        if (want_jacobian) {
          for (int j = 0; j < nv; ++j) {
            out.macro.emplace_back(lp1[i], lp1[j], Ik1 * dot_grad(g, i, j, dim));
            if (L.has_c1) {
              double val = 0.0;
              if (f.emit_coeff_value) val += Ik1d[j] * gp1_gi - S1d[j] * gc1_gi;
              if (f.emit_coeff_grad) val -= S1 * dot_grad(g, i, j, dim);
              if (val != 0.0) out.macro.emplace_back(lp1[i], lc1[j], val);
            }
          }
        }
      }
    }

    // --- Butler-Volmer source terms and the scalar surface equation ---
    if (electrode && !plan.hooks.chemistry_zero) {
      const double a1 = ps.a1_of(tag);
      const double a2 = ps.a2_of(tag);
      const double c2s_J = c2s_J_of(slot);
      const double c2s_U = c2s_U_of(slot);

      double Jacc = 0.0, dJacc_dc2 = 0.0;
      double dJacc_dc1[3] = {0, 0, 0}, dJacc_dp1[3] = {0, 0, 0}, dJacc_dp2[3] = {0, 0, 0};
      double u_c1[3] = {0, 0, 0}, u_p1[3] = {0, 0, 0}, u_p2[3] = {0, 0, 0};
      double b[3];
      try {
        const double U = ocp_value(ps, tag, c2s_U);
        const double Uprime = ocp_derivative(ps, tag, c2s_U);
        for (Index q = 0; q < q_chem.size(); ++q) {
          basis_values(dim, q_chem, q, b);
          const double wq = q_chem.weights(q) * g.detJ;
          double c1q = 0.0, p1q = 0.0, p2q = 0.0;
          for (int i = 0; i < nv; ++i) {
            c1q += f.c1_J[g.verts[i]] * b[i];
            p1q += f.phi1[g.verts[i]] * b[i];
            p2q += f.phi2[dofs.phi2_of_vertex[g.verts[i]]] * b[i];
          }
          const double eta = p2q - p1q - U;
          const BvEval bv = butler_volmer(ps, tag, c1q, c2s_J, eta);
          const double Jc2tot = (f.emit_c2s_J ? bv.dJ_dc2s : 0.0) +
                                (f.emit_c2s_U ? -bv.dJ_deta * Uprime : 0.0);

          for (int i = 0; i < nv; ++i) {
            if (L.has_c1) out.residual(lc1[i]) -= wq * a1 * bv.J * b[i];
            if (L.has_phi1) out.residual(lp1[i]) -= wq * a2 * bv.J * b[i];
            if (L.has_phi2) out.residual(lp2[i]) += wq * a2 * bv.J * b[i];
          }
          if (want_jacobian) {
            for (int i = 0; i < nv; ++i) {
              for (int j = 0; j < nv; ++j) {
                const double bb = wq * b[j] * b[i];
                if (L.has_c1) {
                  if (f.emit_c1_J) out.macro.emplace_back(lc1[i], lc1[j], -a1 * bv.dJ_dc1 * bb);
                  if (f.emit_phi1) out.macro.emplace_back(lc1[i], lp1[j], a1 * bv.dJ_deta * bb);
                  if (f.emit_phi2) out.macro.emplace_back(lc1[i], lp2[j], -a1 * bv.dJ_deta * bb);
                }
                if (L.has_phi1) {
                  if (f.emit_c1_J) out.macro.emplace_back(lp1[i], lc1[j], -a2 * bv.dJ_dc1 * bb);
                  if (f.emit_phi1) out.macro.emplace_back(lp1[i], lp1[j], a2 * bv.dJ_deta * bb);
                  if (f.emit_phi2) out.macro.emplace_back(lp1[i], lp2[j], -a2 * bv.dJ_deta * bb);
                }
                if (L.has_phi2) {
                  if (f.emit_c1_J) out.macro.emplace_back(lp2[i], lc1[j], a2 * bv.dJ_dc1 * bb);
                  if (f.emit_phi1) out.macro.emplace_back(lp2[i], lp1[j], -a2 * bv.dJ_deta * bb);
                  if (f.emit_phi2) out.macro.emplace_back(lp2[i], lp2[j], a2 * bv.dJ_deta * bb);
                }
              }
              if (L.has_surf && Jc2tot != 0.0) {
                const double wb = wq * Jc2tot * b[i];
                if (L.has_c1) u_c1[i] -= a1 * wb;
                if (L.has_phi1) u_p1[i] -= a2 * wb;
                if (L.has_phi2) u_p2[i] += a2 * wb;
              }
            }
          }
          if (L.has_surf) {
            Jacc += wq * bv.J;
            if (want_jacobian) {
              dJacc_dc2 += wq * Jc2tot;
              for (int j = 0; j < nv; ++j) {
                if (f.emit_c1_J) dJacc_dc1[j] += wq * bv.dJ_dc1 * b[j];
                if (f.emit_phi1) dJacc_dp1[j] -= wq * bv.dJ_deta * b[j];
                if (f.emit_phi2) dJacc_dp2[j] += wq * bv.dJ_deta * b[j];
              }
            }
          }
        }
      } catch (const ChemistryDomainError& err) {
        throw ChemistryDomainError("element " + std::to_string(e) + ": " + err.what());
      }

      if (L.has_surf) {
        const RadialOperator& rop = ctx.radial_op(tag);
        const double scale = ctx.tau * ps.Rs_of(tag) * ps.Rs_of(tag) / (ps.F * g.volume);
        const Vector& C_prev = plan.prev->c2[slot];
        out.residual(L.surf + slot) =
            x(L.surf + slot) + rop.surface_response * scale * Jacc - rop.history_map.dot(C_prev);
        if (want_jacobian) {
          out.w_diag(slot) = 1.0 + rop.surface_response * scale * dJacc_dc2;
          auto& vrow = out.v_rows[slot];
          auto& ucol = out.u_cols[slot];
          for (int j = 0; j < nv; ++j) {
            if (L.has_c1 && f.emit_c1_J)
              vrow.emplace_back(lc1[j], rop.surface_response * scale * dJacc_dc1[j]);
            if (L.has_phi1 && f.emit_phi1)
              vrow.emplace_back(lp1[j], rop.surface_response * scale * dJacc_dp1[j]);
            if (L.has_phi2 && f.emit_phi2)
              vrow.emplace_back(lp2[j], rop.surface_response * scale * dJacc_dp2[j]);
            if (L.has_c1 && u_c1[j] != 0.0) ucol.emplace_back(lc1[j], u_c1[j]);
            if (L.has_phi1 && u_p1[j] != 0.0) ucol.emplace_back(lp1[j], u_p1[j]);
            if (L.has_phi2 && u_p2[j] != 0.0) ucol.emplace_back(lp2[j], u_p2[j]);
          }
        }
      }
    } else if (electrode && plan.hooks.chemistry_zero && L.has_surf) {
      // J == 0: the surface equation keeps its linear part.
      const RadialOperator& rop = ctx.radial_op(tag);
      const Vector& C_prev = plan.prev->c2[slot];
      out.residual(L.surf + slot) = x(L.surf + slot) - rop.history_map.dot(C_prev);
      if (want_jacobian) out.w_diag(slot) = 1.0;
    }
  }

  // --- applied current on Gamma ---
  if (L.has_phi2) {
    if (ctx.current.facet_values.size() != mesh.boundary_facets.size())
      throw std::logic_error("assemble_system: boundary current not aligned with facets");
    for (size_t fi = 0; fi < mesh.boundary_facets.size(); ++fi) {
      const BoundaryFacet& bf = mesh.boundary_facets[fi];
      const double Iv = ctx.current.facet_values[fi];
      if (Iv == 0.0) continue;
      if (mesh.dim == 1) {
        const Index p2 = dofs.phi2_of_vertex[bf.v[0]];
        if (p2 < 0) throw std::logic_error("current-collector facet without phi2 dof");
        out.residual(L.phi2 + p2) += Iv; // point-evaluation convention, unit weight
      } else {
        const double len = mesh.facet_measure(bf);
        for (int i = 0; i < 2; ++i) {
          const Index p2 = dofs.phi2_of_vertex[bf.v[i]];
          if (p2 < 0) throw std::logic_error("current-collector facet without phi2 dof");
          out.residual(L.phi2 + p2) += Iv * len * 0.5; // exact for P1 test functions
        }
      }
    }
  }

  return out;
}

BoundaryCurrent galvanostatic_load(const CellMesh& mesh, double I_value) {
  BoundaryCurrent bc;
  bc.facet_values.assign(mesh.boundary_facets.size(), 0.0);
  double measure_n = 0.0, measure_p = 0.0;
  for (const BoundaryFacet& f : mesh.boundary_facets) {
    if (f.tag == FacetTag::GammaN) measure_n += mesh.facet_measure(f);
    if (f.tag == FacetTag::GammaP) measure_p += mesh.facet_measure(f);
  }
  if (measure_n <= 0.0 || measure_p <= 0.0) throw ValidationError("empty GammaN or GammaP");
  const double ratio = measure_p / measure_n;
  for (size_t i = 0; i < mesh.boundary_facets.size(); ++i) {
    const FacetTag t = mesh.boundary_facets[i].tag;
    if (t == FacetTag::GammaP) bc.facet_values[i] = I_value;
    if (t == FacetTag::GammaN) bc.facet_values[i] = -I_value * ratio;
  }
  return bc;
}

namespace {

AssemblyContext full_context(const ParameterSet& ps, const CellMesh& mesh, const RadialOperator& rop_n,
                             const RadialOperator& rop_p, double tau, double t_k) {
  AssemblyContext ctx;
  ctx.ps = &ps;
  ctx.mesh = &mesh;
  ctx.dofs = nullptr; // filled by caller
  ctx.rop[0] = &rop_n;
  ctx.rop[1] = &rop_p;
  ctx.tau = tau;
  ctx.current = galvanostatic_load(mesh, ps.current.value_at(t_k));
  return ctx;
}

} // namespace

Vector assemble_residual(const ParameterSet& ps, const CellMesh& mesh, const RadialOperator& rop_n,
                         const RadialOperator& rop_p, const DiscreteState& state_k,
                         const DiscreteState& state_prev, double tau, double t_k) {
  DofMap dofs = build_dofmap(mesh, rop_n.grid, rop_p.grid);
  AssemblyContext ctx = full_context(ps, mesh, rop_n, rop_p, tau, t_k);
  ctx.dofs = &dofs;
  EvalPlan plan;
  plan.layout = BlockLayout::make(dofs, true, true, true, true);
  plan.sources = EvalSources::all_unknown();
  plan.prev = &state_prev;
  const Vector x = pack_state(dofs, plan.layout, state_k);
  return assemble_system(ctx, plan, x, false).residual;
}

BlockJacobian assemble_jacobian(const ParameterSet& ps, const CellMesh& mesh, const RadialOperator& rop_n,
                                const RadialOperator& rop_p, const DiscreteState& state_k,
                                const DiscreteState& state_prev, double tau, double t_k) {
  DofMap dofs = build_dofmap(mesh, rop_n.grid, rop_p.grid);
  AssemblyContext ctx = full_context(ps, mesh, rop_n, rop_p, tau, t_k);
  ctx.dofs = &dofs;
  EvalPlan plan;
  plan.layout = BlockLayout::make(dofs, true, true, true, true);
  plan.sources = EvalSources::all_unknown();
  plan.prev = &state_prev;
  const Vector x = pack_state(dofs, plan.layout, state_k);
  AssembledSystem sys = assemble_system(ctx, plan, x, true);

  BlockJacobian J;
  J.n_macro = dofs.n_macro();
  J.J_macro.resize(dofs.n_macro(), dofs.n_macro());
  J.J_macro.setFromTriplets(sys.macro.begin(), sys.macro.end());
  J.U_src = std::move(sys.u_cols);
  J.V_bdry = std::move(sys.v_rows);
  J.D_micro = std::move(sys.w_diag);
  return J;
}

namespace {

double source_integral(const ParameterSet& ps, const CellMesh& mesh, const DofMap& dofs,
                       const DiscreteState& state, bool absolute) {
  const QuadratureRule q_chem = quadrature_rules(mesh.dim, 4);
  double acc = 0.0;
  for (Index e = 0; e < mesh.n_elements(); ++e) {
    const Element& el = mesh.elements[e];
    if (!is_electrode(el.tag)) continue;
    const ElemGeom g = element_geometry(mesh, e);
    const Index slot = dofs.micro_of_element[e];
    const double c2s = state.c2_surf(slot);
    const double U = ocp_value(ps, el.tag, c2s);
    const double a2 = ps.a2_of(el.tag);
    double b[3];
    for (Index q = 0; q < q_chem.size(); ++q) {
      basis_values(mesh.dim, q_chem, q, b);
      const double wq = q_chem.weights(q) * g.detJ;
      double c1q = 0.0, p1q = 0.0, p2q = 0.0;
      for (int i = 0; i < g.nv; ++i) {
        c1q += state.c1(g.verts[i]) * b[i];
        p1q += state.phi1(g.verts[i]) * b[i];
        p2q += state.phi2(dofs.phi2_of_vertex[g.verts[i]]) * b[i];
      }
      const double J = butler_volmer(ps, el.tag, c1q, c2s, p2q - p1q - U).J;
      acc += wq * a2 * (absolute ? std::abs(J) : J);
    }
  }
  return acc;
}

} // namespace

double discrete_source_balance(const ParameterSet& ps, const CellMesh& mesh, const RadialOperator& rop_n,
                               const RadialOperator& rop_p, const DiscreteState& state) {
  DofMap dofs = build_dofmap(mesh, rop_n.grid, rop_p.grid);
  return source_integral(ps, mesh, dofs, state, false);
}

double discrete_source_scale(const ParameterSet& ps, const CellMesh& mesh, const RadialOperator& rop_n,
                             const RadialOperator& rop_p, const DiscreteState& state) {
  DofMap dofs = build_dofmap(mesh, rop_n.grid, rop_p.grid);
  return source_integral(ps, mesh, dofs, state, true);
}

} // namespace dfn
