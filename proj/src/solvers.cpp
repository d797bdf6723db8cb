#include "dfn/solvers.hpp"

#include "dfn/parallel.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cmath>
#include <limits>
#include <memory>

namespace dfn {

SolverKind solver_kind_from_string(const std::string& name) {
  if (name == "2ds_fc") return SolverKind::TwoDS_FC;
  if (name == "2ds_eta") return SolverKind::TwoDS_Eta;
  if (name == "1ds_eta") return SolverKind::OneDS_Eta;
  if (name == "gsn_fc") return SolverKind::GSN_FC;
  if (name == "gsn_macro") return SolverKind::GSN_Macro;
  if (name == "gsn_phi") return SolverKind::GSN_Phi;
  if (name == "gsn_fd") return SolverKind::GSN_FD;
  throw ValidationError("unknown solver kind '" + name + "'");
}

const char* solver_kind_name(SolverKind kind) {
  switch (kind) {
    case SolverKind::TwoDS_FC: return "2ds_fc";
    case SolverKind::TwoDS_Eta: return "2ds_eta";
    case SolverKind::OneDS_Eta: return "1ds_eta";
    case SolverKind::GSN_FC: return "gsn_fc";
    case SolverKind::GSN_Macro: return "gsn_macro";
    case SolverKind::GSN_Phi: return "gsn_phi";
    case SolverKind::GSN_FD: return "gsn_fd";
  }
  return "?";
}

double relative_update(const Vector& x_new, const Vector& x_old, double floor_factor) {
  const double scale = x_old.size() ? x_old.cwiseAbs().maxCoeff() : 0.0;
  const double floor = floor_factor * std::max(scale, std::numeric_limits<double>::min());
  double worst = 0.0;
  for (Index i = 0; i < x_new.size(); ++i) {
    const double delta = std::abs(x_new(i) - x_old(i));
    if (delta == 0.0) continue;
    worst = std::max(worst, delta / std::max(std::abs(x_old(i)), floor));
  }
  return worst;
}

Vector newton_solve(const NewtonCallbacks& sys, Vector x, const SolverConfig& cfg, SolverReport& report) {
  report.residual_history.clear();
  Vector F;
  try {
    F = sys.residual(x);
  } catch (const ChemistryDomainError& err) {
    throw SolverError(std::string("newton_solve: initial iterate inadmissible: ") + err.what());
  }
  double fnorm = F.norm();
  report.residual_history.push_back(fnorm);
  if (fnorm <= cfg.newton_abs_tol) return x;

  for (int it = 1; it <= cfg.max_newton; ++it) {
    const Vector d = sys.direction(x, F);
    // A full step below the update tolerance means the iteration has
    // stagnated at its attainable accuracy; take it and stop.
    if (relative_update(x + d, x, cfg.update_norm_floor) <= cfg.newton_rel_tol) {
      try {
        Vector x_new = x + d;
        Vector F_new = sys.residual(x_new);
        if (F_new.norm() <= fnorm) {
          x = std::move(x_new);
          fnorm = F_new.norm();
        }
      } catch (const ChemistryDomainError&) {
        // keep x
      }
      ++report.newton_iterations_total;
      report.residual_history.push_back(fnorm);
      return x;
    }
    double gamma = 1.0;
    bool accepted = false;
    Vector x_trial, F_trial;
    double fnorm_trial = 0.0;
    for (int h = 0; h <= cfg.max_halvings; ++h) {
      x_trial = x + gamma * d;
      bool admissible = true;
      try {
        F_trial = sys.residual(x_trial);
      } catch (const ChemistryDomainError&) {
        admissible = false;
      }
      if (admissible) {
        fnorm_trial = F_trial.norm();
        if (fnorm_trial <= (1.0 - cfg.armijo_c * gamma) * fnorm) {
          accepted = true;
          break;
        }
      }
      gamma *= cfg.backtrack_factor;
    }
    if (!accepted) {
      if (sys.floor_hint && fnorm <= 100.0 * sys.floor_hint()) return x; // at the FP floor
      char msg[160];
      std::snprintf(msg, sizeof(msg),
                    "newton_solve: line search stalled at iteration %d (step %.3e, residual %.3e)", it,
                    gamma, fnorm);
      throw SolverError(msg);
    }
    const double rel = relative_update(x_trial, x, cfg.update_norm_floor);
    x = std::move(x_trial);
    F = std::move(F_trial);
    fnorm = fnorm_trial;
    ++report.newton_iterations_total;
    report.residual_history.push_back(fnorm);
    if (fnorm <= cfg.newton_abs_tol || rel <= cfg.newton_rel_tol) return x;
  }
  throw SolverError("newton_solve: max_newton = " + std::to_string(cfg.max_newton) +
                    " exceeded (residual " + std::to_string(fnorm) + ")");
}

void fix_nullspace(std::vector<Triplet>& triplets, Vector& rhs, Index pin, Index n) {
  if (pin < 0 || pin >= n) throw ValidationError("fix_nullspace: pin index out of range");
  std::erase_if(triplets, [pin](const Triplet& t) { return t.row() == pin || t.col() == pin; });
  triplets.emplace_back(pin, pin, 1.0);
  rhs(pin) = 0.0;
}

double phi1_mean(const CellMesh& mesh, const DiscreteState& state) {
  double integral = 0.0;
  const int nv = mesh.verts_per_element();
  for (Index e = 0; e < mesh.n_elements(); ++e) {
    double s = 0.0;
    for (int i = 0; i < nv; ++i) s += state.phi1(mesh.elements[e].v[i]);
    integral += mesh.element_volume(e) * s / nv; // exact for P1
  }
  return integral / mesh.total_volume();
}

double shift_mean(const CellMesh& mesh, DiscreteState& state) {
  const double C = -phi1_mean(mesh, state);
  state.phi1.array() += C;
  state.phi2.array() += C;
  return C;
}

double state_distance(const DiscreteState& a, const DiscreteState& b) {
  auto block = [](const Vector& x, const Vector& y) {
    const double scale = std::max({x.cwiseAbs().maxCoeff(), y.cwiseAbs().maxCoeff(), 1e-300});
    return (x - y).cwiseAbs().maxCoeff() / scale;
  };
  double worst = std::max({block(a.c1, b.c1), block(a.phi1, b.phi1), block(a.phi2, b.phi2)});
  double c2_scale = 1e-300, c2_diff = 0.0;
  for (size_t m = 0; m < a.c2.size(); ++m) {
    c2_scale = std::max({c2_scale, a.c2[m].cwiseAbs().maxCoeff(), b.c2[m].cwiseAbs().maxCoeff()});
    c2_diff = std::max(c2_diff, (a.c2[m] - b.c2[m]).cwiseAbs().maxCoeff());
  }
  return std::max(worst, c2_diff / c2_scale);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Vector sparse_solve(std::vector<Triplet>&& triplets, Vector rhs, Index n, Index pin, SolverReport& report) {
  if (pin >= 0) fix_nullspace(triplets, rhs, pin, n);
  SparseMat A(n, n);
  A.setFromTriplets(triplets.begin(), triplets.end());
  A.makeCompressed();
  Eigen::SparseLU<SparseMat, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(A);
  lu.factorize(A);
  if (lu.info() != Eigen::Success) throw SolverError("sparse LU factorization failed");
  ++report.linear_solves;
  report.peak_matrix_order = std::max(report.peak_matrix_order, n);
  return lu.solve(rhs);
}

void check_w_diag(const AssembledSystem& sys, const DofMap& dofs) {
  for (Index m = 0; m < sys.w_diag.size(); ++m) {
    if (!(std::isfinite(sys.w_diag(m))) || sys.w_diag(m) == 0.0)
      throw SolverError("singular D_micro entry at element " +
                        std::to_string(dofs.element_of_micro[m]));
  }
}

struct StepContext {
  const ParameterSet* ps;
  const CellMesh* mesh;
  const DofMap* dofs;
  const RadialOperator* rop_n;
  const RadialOperator* rop_p;
  double tau;
  double t_k;
  const SolverConfig* cfg;
  const BoundaryCurrent* current;

  AssemblyContext actx() const {
    AssemblyContext a;
    a.ps = ps;
    a.mesh = mesh;
    a.dofs = dofs;
    a.rop[0] = rop_n;
    a.rop[1] = rop_p;
    a.tau = tau;
    a.current = *current;
    return a;
  }
  const RadialOperator& rop(SubdomainTag tag) const {
    return tag == SubdomainTag::Negative ? *rop_n : *rop_p;
  }
};

/// Newton solve of one (sub)system, with the direction obtained either by
/// Schur elimination of the surface block or from the unreduced matrix.
double triplet_scale(const std::vector<Triplet>& trips) {
  double worst = 0.0;
  for (const Triplet& t : trips) worst = std::max(worst, std::abs(t.value()));
  return worst;
}

double residual_floor(double matrix_scale, const Vector& x, Index n) {
  const double xs = x.size() ? x.cwiseAbs().maxCoeff() : 1.0;
  return std::numeric_limits<double>::epsilon() * matrix_scale * std::max(1.0, xs) *
         std::sqrt(static_cast<double>(n));
}

Vector newton_on_plan(const StepContext& sc, const EvalPlan& plan, Vector x0, bool eliminate_surface,
                      Index pin_global, SolverReport& report) {
  const AssemblyContext actx = sc.actx();
  const BlockLayout& L = plan.layout;

  auto floor_state = std::make_shared<double>(0.0);
  NewtonCallbacks cb;
  cb.floor_hint = [floor_state] { return *floor_state; };
  cb.residual = [&](const Vector& x) { return assemble_system(actx, plan, x, false).residual; };
  cb.direction = [&, floor_state](const Vector& x, const Vector& F) -> Vector {
    AssembledSystem sys = assemble_system(actx, plan, x, true);
    if (L.has_surf) check_w_diag(sys, *sc.dofs);
    if (!L.has_surf) {
      *floor_state = residual_floor(triplet_scale(sys.macro), x, L.size);
      Vector rhs = -F;
      return sparse_solve(std::move(sys.macro), std::move(rhs), L.size, pin_global, report);
    }
    if (eliminate_surface) {
      std::vector<Triplet> trips = sys.macro;
      Vector rhs_macro = eliminate_surface_block(sys, L, trips);
      *floor_state =
          residual_floor(std::max(triplet_scale(trips), sys.w_diag.cwiseAbs().maxCoeff()), x, L.size);
      Vector d_macro = sparse_solve(std::move(trips), std::move(rhs_macro), L.n_macro, pin_global, report);
      Vector d(L.size);
      d.head(L.n_macro) = d_macro;
      for (Index m = 0; m < sys.w_diag.size(); ++m) {
        double vdot = 0.0;
        for (const auto& [c, v] : sys.v_rows[m]) vdot += v * d_macro(c);
        d(L.surf + m) = -(sys.residual(L.surf + m) + vdot) / sys.w_diag(m);
      }
      return d;
    }
    std::vector<Triplet> trips = std::move(sys.macro);
    for (Index m = 0; m < sys.w_diag.size(); ++m) {
      const Index srow = L.surf + m;
      trips.emplace_back(srow, srow, sys.w_diag(m));
      for (const auto& [c, v] : sys.v_rows[m]) trips.emplace_back(srow, c, v);
      for (const auto& [r, v] : sys.u_cols[m]) trips.emplace_back(r, srow, v);
    }
    *floor_state = residual_floor(triplet_scale(trips), x, L.size);
    Vector rhs = -F;
    return sparse_solve(std::move(trips), std::move(rhs), L.size, pin_global, report);
  };

  return newton_solve(cb, std::move(x0), *sc.cfg, report);
}

/// Step 2 (local backward recovery): fill interior radial DOFs from the
/// converged surface values. J_hi comes from the converged scalar equation.
/// Slots are independent; the loop runs element-parallel with no shared
/// mutable state.
void recover_interior(const StepContext& sc, const DiscreteState& prev, DiscreteState& cur,
                      SolverReport& report) {
  const DofMap& dofs = *sc.dofs;
  Index peak = 0;
  parallel_for(dofs.n_surf, [&](long m) {
    const Index e = dofs.element_of_micro[m];
    const RadialOperator& op = sc.rop(sc.mesh->elements[e].tag);
    const double s = cur.c2_surf(m);
    const double J_hi = (op.history_map.dot(prev.c2[m]) - s) / op.surface_response;
    cur.c2[m] = backward_recover(op, prev.c2[m], J_hi);
  });
  for (Index m = 0; m < dofs.n_surf; ++m) {
    const RadialOperator& op = sc.rop(sc.mesh->elements[dofs.element_of_micro[m]].tag);
    peak = std::max(peak, op.n_nodes());
    ++report.linear_solves;
  }
  report.peak_matrix_order = std::max(report.peak_matrix_order, peak);
}

/// Micro-field subproblem of the decomposition solvers: per-element scalar
/// surface equations (a diagonal Newton system) followed by full recovery.
void solve_micro_field(const StepContext& sc, const DiscreteState& frozen_macro, const DiscreteState& prev,
                       DiscreteState& cur, SolverReport& report) {
  const DofMap& dofs = *sc.dofs;
  EvalPlan plan;
  plan.layout = BlockLayout::make(dofs, false, false, false, true);
  plan.sources.c1_in_J = ArgSource::Frozen;
  plan.sources.c1_in_coeff = ArgSource::Frozen;
  plan.sources.phi1 = ArgSource::Frozen;
  plan.sources.phi2 = ArgSource::Frozen;
  plan.sources.c2s_in_J = ArgSource::Unknown;
  plan.sources.c2s_in_U = ArgSource::Unknown;
  plan.frozen = &frozen_macro;
  plan.prev = &prev;

  const AssemblyContext actx = sc.actx();
  auto floor_state = std::make_shared<double>(0.0);
  NewtonCallbacks cb;
  cb.floor_hint = [floor_state] { return *floor_state; };
  cb.residual = [&](const Vector& x) { return assemble_system(actx, plan, x, false).residual; };
  cb.direction = [&, floor_state](const Vector& x, const Vector& F) -> Vector {
    AssembledSystem sys = assemble_system(actx, plan, x, true);
    check_w_diag(sys, dofs);
    *floor_state = residual_floor(sys.w_diag.cwiseAbs().maxCoeff(), x, x.size());
    ++report.linear_solves; // diagonal system, element-local scalars
    report.peak_matrix_order = std::max<Index>(report.peak_matrix_order, 1);
    return (-F.array() / sys.w_diag.array()).matrix();
  };

  Vector x0(dofs.n_surf);
  for (Index m = 0; m < dofs.n_surf; ++m) x0(m) = cur.c2_surf(m);
  const Vector x = newton_solve(cb, std::move(x0), *sc.cfg, report);
  for (Index m = 0; m < dofs.n_surf; ++m) cur.c2[m](cur.c2[m].size() - 1) = x(m);
  recover_interior(sc, prev, cur, report);
}

/// Outer-loop relative update over (c1, phi1, phi2, c2): full radial vectors
/// when `full_c2`, surface values only otherwise.
double outer_update(const DiscreteState& now, const DiscreteState& before, double floor_factor,
                    bool full_c2) {
  double worst = std::max({relative_update(now.c1, before.c1, floor_factor),
                           relative_update(now.phi1, before.phi1, floor_factor),
                           relative_update(now.phi2, before.phi2, floor_factor)});
  if (full_c2) {
    for (size_t m = 0; m < now.c2.size(); ++m)
      worst = std::max(worst, relative_update(now.c2[m], before.c2[m], floor_factor));
  } else {
    Vector sn(static_cast<Index>(now.c2.size())), sb(sn.size());
    for (Index m = 0; m < sn.size(); ++m) {
      sn(m) = now.c2_surf(m);
      sb(m) = before.c2_surf(m);
    }
    worst = std::max(worst, relative_update(sn, sb, floor_factor));
  }
  return worst;
}

EvalSources frozen_sources() {
  EvalSources s;
  s.c1_in_J = s.c1_in_coeff = s.phi1 = s.phi2 = s.c2s_in_J = s.c2s_in_U = ArgSource::Frozen;
  return s;
}

} // namespace

Vector eliminate_surface_block(const AssembledSystem& sys, const BlockLayout& layout,
                               std::vector<Triplet>& macro_triplets) {
  Vector rhs = -sys.residual.head(layout.n_macro);
  for (Index m = 0; m < sys.w_diag.size(); ++m) {
    const double w = sys.w_diag(m);
    const double Fs = sys.residual(layout.surf + m);
    for (const auto& [r, uv] : sys.u_cols[m]) {
      rhs(r) += uv * Fs / w;
      for (const auto& [c, vv] : sys.v_rows[m]) macro_triplets.emplace_back(r, c, -uv * vv / w);
    }
  }
  return rhs;
}

StepResult solve_step_2ds_fc(const ParameterSet& ps, const CellMesh& mesh, const DofMap& dofs,
                             const RadialOperator& rop_n, const RadialOperator& rop_p,
                             const DiscreteState& prev, double tau, double t_k, const SolverConfig& cfg,
                             const BoundaryCurrent& current) {
  const auto t0 = Clock::now();
  StepContext sc{&ps, &mesh, &dofs, &rop_n, &rop_p, tau, t_k, &cfg, &current};
  StepResult out;
  out.state = prev;

  EvalPlan plan;
  plan.layout = BlockLayout::make(dofs, true, true, true, true);
  plan.sources = EvalSources::all_unknown();
  plan.prev = &prev;
  const Index pin = plan.layout.phi2 + cfg.pin_phi2_dof;

  Vector x = pack_state(dofs, plan.layout, prev);
  x = newton_on_plan(sc, plan, std::move(x), /*eliminate=*/true, pin, out.report);
  unpack_state(dofs, plan.layout, x, out.state);

  recover_interior(sc, prev, out.state, out.report);
  shift_mean(mesh, out.state);
  out.report.outer_iterations = 1;
  out.report.wall_time = seconds_since(t0);
  return out;
}

StepResult solve_step_eta(bool eliminate_surface, const ParameterSet& ps, const CellMesh& mesh,
                          const DofMap& dofs, const RadialOperator& rop_n, const RadialOperator& rop_p,
                          const DiscreteState& prev, double tau, double t_k, const SolverConfig& cfg,
                          const BoundaryCurrent& current) {
  const auto t0 = Clock::now();
  StepContext sc{&ps, &mesh, &dofs, &rop_n, &rop_p, tau, t_k, &cfg, &current};
  StepResult out;
  DiscreteState cur = prev;

  bool converged = false;
  for (int n = 1; n <= cfg.max_outer; ++n) {
    const DiscreteState outer_prev = cur;

    // Subproblem (c1): J evaluated at (c1, c2bar^{n-1}, eta^{n-1}).
    {
      EvalPlan plan;
      plan.layout = BlockLayout::make(dofs, true, false, false, false);
      plan.sources = frozen_sources();
      plan.sources.c1_in_J = ArgSource::Unknown;
      plan.frozen = &outer_prev;
      plan.prev = &prev;
      Vector x = cur.c1;
      x = newton_on_plan(sc, plan, std::move(x), false, -1, out.report);
      cur.c1 = x;
    }

    // Subproblem (phi1, phi2, c2bar) with c1 frozen at its new value.
    {
      EvalPlan plan;
      plan.layout = BlockLayout::make(dofs, false, true, true, true);
      plan.sources = EvalSources::all_unknown();
      plan.sources.c1_in_J = ArgSource::Frozen;
      plan.sources.c1_in_coeff = ArgSource::Frozen;
      plan.frozen = &cur;
      plan.prev = &prev;
      const Index pin = plan.layout.phi2 + cfg.pin_phi2_dof;
      Vector x = pack_state(dofs, plan.layout, cur);
      x = newton_on_plan(sc, plan, std::move(x), eliminate_surface, pin, out.report);
      unpack_state(dofs, plan.layout, x, cur);
    }

    out.report.outer_iterations = n;
    if (outer_update(cur, outer_prev, cfg.update_norm_floor, /*full_c2=*/false) < cfg.outer_rtol) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw SolverError("eta solver: max_outer = " + std::to_string(cfg.max_outer) + " exceeded");

  recover_interior(sc, prev, cur, out.report);
  shift_mean(mesh, cur);
  out.state = std::move(cur);
  out.report.wall_time = seconds_since(t0);
  return out;
}

namespace {

StepResult solve_step_gsn_fc(const StepContext& sc, const DiscreteState& prev) {
  const auto t0 = Clock::now();
  const DofMap& dofs = *sc.dofs;
  StepResult out;

  // Monolithic unknown vector: [c1 | phi1 | phi2 | all radial DOFs].
  std::vector<Index> micro_offset(dofs.n_surf);
  Index off = dofs.n_macro();
  for (Index m = 0; m < dofs.n_surf; ++m) {
    micro_offset[m] = off;
    off += dofs.micro_nodes[m];
  }
  const Index n_full = off;

  EvalPlan plan;
  plan.layout = BlockLayout::make(dofs, true, true, true, true);
  plan.sources = EvalSources::all_unknown();
  plan.prev = &prev;
  const AssemblyContext actx = sc.actx();

  auto reduced_of_full = [&](const Vector& xf) {
    Vector xr(plan.layout.size);
    xr.head(dofs.n_macro()) = xf.head(dofs.n_macro());
    for (Index m = 0; m < dofs.n_surf; ++m)
      xr(plan.layout.surf + m) = xf(micro_offset[m] + dofs.micro_nodes[m] - 1);
    return xr;
  };

  auto micro_op = [&](Index m) -> const RadialOperator& {
    return sc.rop(sc.mesh->elements[dofs.element_of_micro[m]].tag);
  };

  auto full_residual = [&](const Vector& xf, const AssembledSystem& sys) {
    Vector F = Vector::Zero(n_full);
    F.head(dofs.n_macro()) = sys.residual.head(dofs.n_macro());
    for (Index m = 0; m < dofs.n_surf; ++m) {
      const RadialOperator& op = micro_op(m);
      const Index N = dofs.micro_nodes[m];
      const Vector C = xf.segment(micro_offset[m], N);
      const double s = C(N - 1);
      const double J_hi = (sys.residual(plan.layout.surf + m) - s + op.history_map.dot(prev.c2[m])) /
                          op.surface_response;
      Vector r = op.A.multiply(C) - op.M.multiply(prev.c2[m]);
      r(N - 1) += J_hi;
      F.segment(micro_offset[m], N) = r;
    }
    return F;
  };

  auto floor_state = std::make_shared<double>(0.0);
  NewtonCallbacks cb;
  cb.floor_hint = [floor_state] { return *floor_state; };
  cb.residual = [&](const Vector& xf) {
    const AssembledSystem sys = assemble_system(actx, plan, reduced_of_full(xf), false);
    return full_residual(xf, sys);
  };
  cb.direction = [&, floor_state](const Vector& xf, const Vector& F) -> Vector {
    AssembledSystem sys = assemble_system(actx, plan, reduced_of_full(xf), true);
    std::vector<Triplet> trips = std::move(sys.macro);
    for (Index m = 0; m < dofs.n_surf; ++m) {
      const RadialOperator& op = micro_op(m);
      const Index N = dofs.micro_nodes[m];
      const Index base = micro_offset[m];
      for (Index i = 0; i < N; ++i) {
        trips.emplace_back(base + i, base + i, op.A.diag(i));
        if (i + 1 < N) {
          trips.emplace_back(base + i, base + i + 1, op.A.off(i));
          trips.emplace_back(base + i + 1, base + i, op.A.off(i));
        }
      }
      const Index srow = base + N - 1;
      trips.emplace_back(srow, srow, (sys.w_diag(m) - 1.0) / op.surface_response);
      for (const auto& [c, v] : sys.v_rows[m]) trips.emplace_back(srow, c, v / op.surface_response);
      for (const auto& [r, v] : sys.u_cols[m]) trips.emplace_back(r, srow, v);
    }
    *floor_state = residual_floor(triplet_scale(trips), xf, n_full);
    Vector rhs = -F;
    const Index pin = plan.layout.phi2 + sc.cfg->pin_phi2_dof;
    return sparse_solve(std::move(trips), std::move(rhs), n_full, pin, out.report);
  };

  Vector xf(n_full);
  xf.head(dofs.n_macro()) = pack_state(dofs, plan.layout, prev).head(dofs.n_macro());
  for (Index m = 0; m < dofs.n_surf; ++m)
    xf.segment(micro_offset[m], dofs.micro_nodes[m]) = prev.c2[m];

  xf = newton_solve(cb, std::move(xf), *sc.cfg, out.report);

  out.state = prev;
  out.state.c1 = xf.head(dofs.n_c1);
  out.state.phi1 = xf.segment(dofs.phi1_offset(), dofs.n_phi1);
  out.state.phi2 = xf.segment(dofs.phi2_offset(), dofs.n_phi2);
  for (Index m = 0; m < dofs.n_surf; ++m)
    out.state.c2[m] = xf.segment(micro_offset[m], dofs.micro_nodes[m]);
  shift_mean(*sc.mesh, out.state);
  out.report.outer_iterations = 1;
  out.report.wall_time = seconds_since(t0);
  return out;
}

StepResult solve_step_gsn_outer(SolverKind kind, const StepContext& sc, const DiscreteState& prev) {
  const auto t0 = Clock::now();
  const DofMap& dofs = *sc.dofs;
  const SolverConfig& cfg = *sc.cfg;
  StepResult out;
  DiscreteState cur = prev;

  bool converged = false;
  for (int n = 1; n <= cfg.max_outer; ++n) {
    const DiscreteState outer_prev = cur;

    if (kind == SolverKind::GSN_Macro) {
      // Subproblem (c1, phi1, phi2) with c2bar (and U) lagged.
      EvalPlan plan;
      plan.layout = BlockLayout::make(dofs, true, true, true, false);
      plan.sources = EvalSources::all_unknown();
      plan.sources.c2s_in_J = ArgSource::Frozen;
      plan.sources.c2s_in_U = ArgSource::Frozen;
      plan.frozen = &outer_prev;
      plan.prev = &prev;
      const Index pin = plan.layout.phi2 + cfg.pin_phi2_dof;
      Vector x = pack_state(dofs, plan.layout, cur);
      x = newton_on_plan(sc, plan, std::move(x), false, pin, out.report);
      unpack_state(dofs, plan.layout, x, cur);
      solve_micro_field(sc, cur, prev, cur, out.report);
    } else if (kind == SolverKind::GSN_Phi) {
      // Subproblem (c1).
      {
        EvalPlan plan;
        plan.layout = BlockLayout::make(dofs, true, false, false, false);
        plan.sources = frozen_sources();
        plan.sources.c1_in_J = ArgSource::Unknown;
        plan.frozen = &outer_prev;
        plan.prev = &prev;
        Vector x = cur.c1;
        x = newton_on_plan(sc, plan, std::move(x), false, -1, out.report);
        cur.c1 = x;
      }
      // Subproblem (phi1, phi2): c1 at its new value, c2bar and U lagged.
      {
        EvalPlan plan;
        plan.layout = BlockLayout::make(dofs, false, true, true, false);
        plan.sources = frozen_sources();
        plan.sources.phi1 = ArgSource::Unknown;
        plan.sources.phi2 = ArgSource::Unknown;
        plan.frozen = &cur; // c2 surfaces still untouched this outer round
        plan.prev = &prev;
        const Index pin = plan.layout.phi2 + cfg.pin_phi2_dof;
        Vector x = pack_state(dofs, plan.layout, cur);
        x = newton_on_plan(sc, plan, std::move(x), false, pin, out.report);
        unpack_state(dofs, plan.layout, x, cur);
      }
      solve_micro_field(sc, cur, prev, cur, out.report);
    } else { // GSN_FD
      // Subproblem (c2): potentials and c1 at n-1, U at the new surface value.
      solve_micro_field(sc, cur, prev, cur, out.report);
      // Subproblem (phi2): J's c2bar argument stays at n-1, U at the new value.
      {
        EvalPlan plan;
        plan.layout = BlockLayout::make(dofs, false, false, true, false);
        plan.sources = frozen_sources();
        plan.sources.phi2 = ArgSource::Unknown;
        plan.frozen = &outer_prev; // c1, phi1 unchanged so far; c2bar from n-1
        plan.frozen_u = &cur;      // U(c2bar^n)
        plan.prev = &prev;
        Vector x = cur.phi2;
        x = newton_on_plan(sc, plan, std::move(x), false, -1, out.report);
        cur.phi2 = x;
      }
      // Subproblem (phi1) in the full space (the J_eta mass term regularizes).
      {
        EvalPlan plan;
        plan.layout = BlockLayout::make(dofs, false, true, false, false);
        plan.sources = frozen_sources();
        plan.sources.phi1 = ArgSource::Unknown;
        plan.frozen = &cur; // c1 still at n-1, phi2 and c2bar at n
        plan.prev = &prev;
        Vector x = cur.phi1;
        x = newton_on_plan(sc, plan, std::move(x), false, -1, out.report);
        cur.phi1 = x;
      }
      // Subproblem (c1).
      {
        EvalPlan plan;
        plan.layout = BlockLayout::make(dofs, true, false, false, false);
        plan.sources = frozen_sources();
        plan.sources.c1_in_J = ArgSource::Unknown;
        plan.frozen = &cur;
        plan.prev = &prev;
        Vector x = cur.c1;
        x = newton_on_plan(sc, plan, std::move(x), false, -1, out.report);
        cur.c1 = x;
      }
    }

    out.report.outer_iterations = n;
    const double rel = outer_update(cur, outer_prev, cfg.update_norm_floor, /*full_c2=*/true);
    if (std::getenv("DFN_DEBUG_OUTER"))
      std::fprintf(stderr, "[%s] outer %d rel %.3e\n", solver_kind_name(kind), n, rel);
    if (rel < cfg.outer_rtol) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw SolverError(std::string(solver_kind_name(kind)) + ": max_outer = " +
                      std::to_string(cfg.max_outer) + " exceeded");

  shift_mean(*sc.mesh, cur);
  out.state = std::move(cur);
  out.report.wall_time = seconds_since(t0);
  return out;
}

} // namespace

StepResult solve_step_gsn(SolverKind kind, const ParameterSet& ps, const CellMesh& mesh, const DofMap& dofs,
                          const RadialOperator& rop_n, const RadialOperator& rop_p,
                          const DiscreteState& prev, double tau, double t_k, const SolverConfig& cfg,
                          const BoundaryCurrent& current) {
  StepContext sc{&ps, &mesh, &dofs, &rop_n, &rop_p, tau, t_k, &cfg, &current};
  if (kind == SolverKind::GSN_FC) return solve_step_gsn_fc(sc, prev);
  return solve_step_gsn_outer(kind, sc, prev);
}

StepResult solve_step(SolverKind kind, const ParameterSet& ps, const CellMesh& mesh, const DofMap& dofs,
                      const RadialOperator& rop_n, const RadialOperator& rop_p, const DiscreteState& prev,
                      double tau, double t_k, const SolverConfig& cfg, const BoundaryCurrent& current) {
  switch (kind) {
    case SolverKind::TwoDS_FC:
      return solve_step_2ds_fc(ps, mesh, dofs, rop_n, rop_p, prev, tau, t_k, cfg, current);
    case SolverKind::TwoDS_Eta:
      return solve_step_eta(true, ps, mesh, dofs, rop_n, rop_p, prev, tau, t_k, cfg, current);
    case SolverKind::OneDS_Eta:
      return solve_step_eta(false, ps, mesh, dofs, rop_n, rop_p, prev, tau, t_k, cfg, current);
    default:
      return solve_step_gsn(kind, ps, mesh, dofs, rop_n, rop_p, prev, tau, t_k, cfg, current);
  }
}

} // namespace dfn
