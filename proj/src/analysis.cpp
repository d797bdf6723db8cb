#include "dfn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <sstream>

namespace dfn {

const char* norm_name(ErrorNormKind kind) {
  switch (kind) {
    case ErrorNormKind::H1_c1: return "H1_c1";
    case ErrorNormKind::H1_phi1: return "H1_phi1";
    case ErrorNormKind::H1_phi2: return "H1_phi2";
    case ErrorNormKind::L2_surf_c2: return "L2_surf_c2";
    case ErrorNormKind::L2_L2r_c2: return "L2_L2r_c2";
    case ErrorNormKind::L2_H1r_c2: return "L2_H1r_c2";
  }
  return "?";
}

StudyAxis study_axis_from_string(const std::string& name) {
  if (name == "h") return StudyAxis::H;
  if (name == "dr") return StudyAxis::Dr;
  if (name == "tau") return StudyAxis::Tau;
  throw ValidationError("unknown study axis '" + name + "' (h, dr, tau)");
}

namespace {

struct CoarseEval {
  // P1 evaluation data of the coarse element containing a fine point.
  Index elem = -1;
  std::array<double, 3> bary{};
};

CoarseEval locate_in_coarse(const CellMesh& coarse, const Vector& x) {
  const Index e = coarse.locate(x, 1e-10);
  if (e < 0) throw ValidationError("error_norms: meshes are not nested (point not found)");
  CoarseEval ce;
  ce.elem = e;
  const Element& el = coarse.elements[e];
  if (coarse.dim == 1) {
    const double x0 = coarse.vertices(el.v[0], 0);
    const double x1 = coarse.vertices(el.v[1], 0);
    const double t = (x(0) - x0) / (x1 - x0);
    ce.bary = {1.0 - t, t, 0.0};
  } else {
    const Vector2 a = coarse.vertices.row(el.v[0]);
    const Vector2 b = coarse.vertices.row(el.v[1]);
    const Vector2 c = coarse.vertices.row(el.v[2]);
    const double det = (b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y());
    const double l1 = ((x(0) - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (x(1) - a.y())) / det;
    const double l2 = ((b.x() - a.x()) * (x(1) - a.y()) - (x(0) - a.x()) * (b.y() - a.y())) / det;
    ce.bary = {1.0 - l1 - l2, l1, l2};
  }
  return ce;
}

// Resample a coarse radial nodal vector onto the (nested) fine radial nodes.
Vector resample_radial(const RadialGrid& coarse, const Vector& values, const RadialGrid& fine) {
  Vector out(fine.nodes.size());
  Index seg = 0;
  for (Index i = 0; i < fine.nodes.size(); ++i) {
    const double r = fine.nodes(i);
    while (seg + 2 < coarse.nodes.size() && r > coarse.nodes(seg + 1)) ++seg;
    const double r0 = coarse.nodes(seg), r1 = coarse.nodes(seg + 1);
    const double t = (r - r0) / (r1 - r0);
    out(i) = (1.0 - t) * values(seg) + t * values(seg + 1);
  }
  return out;
}

// int over [0, R] of (P1 diff)^2 r^2 dr and (d/dr diff)^2 r^2 dr on the fine grid.
void radial_norm_sq(const RadialGrid& grid, const Vector& diff, double& l2r_sq, double& h1r_semi_sq) {
  const double g = std::sqrt(3.0 / 5.0);
  const double xg[3] = {0.5 * (1.0 - g), 0.5, 0.5 * (1.0 + g)};
  const double wg[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
  l2r_sq = 0.0;
  h1r_semi_sq = 0.0;
  for (Index e = 0; e + 1 < grid.nodes.size(); ++e) {
    const double a = grid.nodes(e), b = grid.nodes(e + 1);
    const double h = b - a;
    const double slope = (diff(e + 1) - diff(e)) / h;
    for (int q = 0; q < 3; ++q) {
      const double r = a + h * xg[q];
      const double w = h * wg[q] * r * r;
      const double v = diff(e) + slope * (r - a);
      l2r_sq += w * v * v;
      h1r_semi_sq += w * slope * slope;
    }
  }
}

} // namespace

NormValues error_norms(const StateOnGrid& coarse, const StateOnGrid& fine) {
  const CellMesh& fm = *fine.mesh;
  const CellMesh& cm = *coarse.mesh;
  const QuadratureRule rule = quadrature_rules(fm.dim, 2); // differences of P1 are P1
  NormValues sq{};

  for (Index e = 0; e < fm.n_elements(); ++e) {
    const Element& fel = fm.elements[e];
    const int nv = fm.verts_per_element();
    const double vol = fm.element_volume(e);
    const Vector centroid = fm.element_centroid(e);
    const CoarseEval ce = locate_in_coarse(cm, centroid);
    const Element& cel = cm.elements[ce.elem];
    if (cel.tag != fel.tag) throw ValidationError("error_norms: nested element tags disagree");

    // Constant P1 gradients on both elements.
    auto grad_of = [](const CellMesh& mesh, const Element& el, const Vector& nodal, int dim) {
      std::array<double, 2> g{0.0, 0.0};
      if (dim == 1) {
        const double h = mesh.vertices(el.v[1], 0) - mesh.vertices(el.v[0], 0);
        g[0] = (nodal(1) - nodal(0)) / h;
      } else {
        const Vector2 a = mesh.vertices.row(el.v[0]);
        const Vector2 b = mesh.vertices.row(el.v[1]);
        const Vector2 c = mesh.vertices.row(el.v[2]);
        const double det = (b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y());
        g[0] = ((nodal(1) - nodal(0)) * (c.y() - a.y()) - (nodal(2) - nodal(0)) * (b.y() - a.y())) / det;
        g[1] = ((nodal(2) - nodal(0)) * (b.x() - a.x()) - (nodal(1) - nodal(0)) * (c.x() - a.x())) / det;
      }
      return g;
    };

    auto accumulate_h1 = [&](int which, const Vector& fine_nodal, const Vector& coarse_nodal) {
      const auto gf = grad_of(fm, fel, fine_nodal, fm.dim);
      const auto gc = grad_of(cm, cel, coarse_nodal, fm.dim);
      double grad_sq = 0.0;
      for (int d = 0; d < fm.dim; ++d) grad_sq += (gc[d] - gf[d]) * (gc[d] - gf[d]);
      double val_sq = 0.0;
      for (Index q = 0; q < rule.size(); ++q) {
        double bf[3], bc0 = 0.0, vfine = 0.0;
        if (fm.dim == 1) {
          const double xi = rule.points(q, 0);
          bf[0] = 1.0 - xi;
          bf[1] = xi;
        } else {
          const double xi = rule.points(q, 0), et = rule.points(q, 1);
          bf[0] = 1.0 - xi - et;
          bf[1] = xi;
          bf[2] = et;
        }
        Vector xq = Vector::Zero(fm.dim);
        for (int i = 0; i < nv; ++i)
          xq += bf[i] * fm.vertices.row(fel.v[i]).transpose();
        for (int i = 0; i < nv; ++i) vfine += bf[i] * fine_nodal(i);
        // coarse barycentric coordinates of xq
        const CoarseEval cq = [&] {
          CoarseEval out = ce; // same element contains every fine quadrature point
          if (cm.dim == 1) {
            const double x0 = cm.vertices(cel.v[0], 0), x1 = cm.vertices(cel.v[1], 0);
            const double t = (xq(0) - x0) / (x1 - x0);
            out.bary = {1.0 - t, t, 0.0};
          } else {
            const Vector2 a = cm.vertices.row(cel.v[0]);
            const Vector2 b = cm.vertices.row(cel.v[1]);
            const Vector2 c = cm.vertices.row(cel.v[2]);
            const double det = (b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y());
            const double l1 =
                ((xq(0) - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (xq(1) - a.y())) / det;
            const double l2 =
                ((b.x() - a.x()) * (xq(1) - a.y()) - (xq(0) - a.x()) * (b.y() - a.y())) / det;
            out.bary = {1.0 - l1 - l2, l1, l2};
          }
          return out;
        }();
        for (int i = 0; i < (cm.dim == 1 ? 2 : 3); ++i) bc0 += cq.bary[i] * coarse_nodal(i);
        const double diff = bc0 - vfine;
        val_sq += rule.weights(q) * (fm.dim == 1 ? vol : 2.0 * vol) * diff * diff;
      }
      sq[which] += val_sq + vol * grad_sq;
    };

    // c1 and phi1 everywhere
    Vector fc1(nv), cc1(nv), fp1(nv), cp1(nv);
    const int cnv = cm.verts_per_element();
    Vector cone(cnv), ctwo(cnv);
    for (int i = 0; i < nv; ++i) {
      fc1(i) = fine.state->c1(fel.v[i]);
      fp1(i) = fine.state->phi1(fel.v[i]);
    }
    for (int i = 0; i < cnv; ++i) {
      cone(i) = coarse.state->c1(cel.v[i]);
      ctwo(i) = coarse.state->phi1(cel.v[i]);
    }
    accumulate_h1(static_cast<int>(ErrorNormKind::H1_c1), fc1, cone);
    accumulate_h1(static_cast<int>(ErrorNormKind::H1_phi1), fp1, ctwo);

    if (is_electrode(fel.tag)) {
      Vector fp2(nv), cp2(cnv);
      for (int i = 0; i < nv; ++i) fp2(i) = fine.state->phi2(fine.dofs->phi2_of_vertex[fel.v[i]]);
      for (int i = 0; i < cnv; ++i) cp2(i) = coarse.state->phi2(coarse.dofs->phi2_of_vertex[cel.v[i]]);
      accumulate_h1(static_cast<int>(ErrorNormKind::H1_phi2), fp2, cp2);

      const Index fslot = fine.dofs->micro_of_element[e];
      const Index cslot = coarse.dofs->micro_of_element[ce.elem];
      const double ds = coarse.state->c2_surf(cslot) - fine.state->c2_surf(fslot);
      sq[static_cast<int>(ErrorNormKind::L2_surf_c2)] += vol * ds * ds;

      const RadialGrid& frad = fel.tag == SubdomainTag::Negative ? *fine.radial_n : *fine.radial_p;
      const RadialGrid& crad = fel.tag == SubdomainTag::Negative ? *coarse.radial_n : *coarse.radial_p;
      const Vector cresampled = resample_radial(crad, coarse.state->c2[cslot], frad);
      const Vector diff = cresampled - fine.state->c2[fslot];
      double l2r_sq = 0.0, h1r_semi_sq = 0.0;
      radial_norm_sq(frad, diff, l2r_sq, h1r_semi_sq);
      sq[static_cast<int>(ErrorNormKind::L2_L2r_c2)] += vol * l2r_sq;
      sq[static_cast<int>(ErrorNormKind::L2_H1r_c2)] += vol * (l2r_sq + h1r_semi_sq);
    }
  }

  NormValues out{};
  for (int i = 0; i < kNormCount; ++i) out[i] = std::sqrt(sq[i]);
  return out;
}

double fit_order(const std::vector<std::pair<int, double>>& level_error) {
  const size_t n = level_error.size();
  if (n < 2) throw ValidationError("fit_order: need at least 2 levels");
  const size_t use = std::min<size_t>(3, n);
  const size_t start = n - use;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = start; i < n; ++i) {
    const double x = level_error[i].first;
    const double y = std::log2(std::max(level_error[i].second, 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double m = static_cast<double>(use);
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return -slope;
}

namespace {

struct StudyRun {
  CellMesh mesh;
  RadialGrid rn, rp;
  DofMap dofs;
  std::vector<DiscreteState> states; // one per eval time
};

StudyRun study_run(const StudySetup& st, int h_level, int dr_level, double tau,
                   const std::vector<double>& eval_times) {
  StudyRun out;
  const CellMesh base = build_laminate(st.geometry);
  out.mesh = refine_uniform(base, h_level);
  out.rn = refine_radial(build_radial(st.ps, SubdomainTag::Negative, st.radial_n), dr_level);
  out.rp = refine_radial(build_radial(st.ps, SubdomainTag::Positive, st.radial_p), dr_level);
  out.dofs = build_dofmap(out.mesh, out.rn, out.rp);
  const RadialOperator rop_n = build_radial_operator(out.rn, st.ps.k2_of(SubdomainTag::Negative), tau);
  const RadialOperator rop_p = build_radial_operator(out.rp, st.ps.k2_of(SubdomainTag::Positive), tau);

  std::vector<int> keep;
  for (double t : eval_times) {
    const int k = static_cast<int>(std::llround(t / tau));
    if (std::abs(k * tau - t) > 1e-9 * std::max(1.0, st.t_end))
      throw ValidationError("convergence_study: evaluation time does not land on the time grid");
    keep.push_back(k);
  }

  SimulationPlan plan;
  plan.t_end = st.t_end;
  plan.tau = tau;
  plan.solver = st.solver;
  RunResult rr = run(plan, st.ps, out.mesh, out.dofs, rop_n, rop_p, st.solver_cfg, keep);
  if (rr.failed) throw SolverError("convergence_study: run failed: " + rr.error);
  for (int k : keep) {
    bool found = false;
    for (auto& [step, state] : rr.kept_states)
      if (step == k) {
        out.states.push_back(state);
        found = true;
        break;
      }
    if (!found) throw SolverError("convergence_study: evaluation step missing from run");
  }
  return out;
}

} // namespace

ConvergenceTable convergence_study(const StudySetup& setup) {
  StudySetup st = setup;
  if (st.levels.empty()) throw ValidationError("convergence_study: empty level list");
  if (!std::is_sorted(st.levels.begin(), st.levels.end()))
    throw ValidationError("convergence_study: levels must ascend");
  if (st.eval_times.empty()) st.eval_times = {st.t_end};

  const int l_ref = st.levels.back() + st.ref_extra;
  if (st.ref_extra < 1) throw ValidationError("convergence_study: reference must be finer than tested levels");

  auto resolve = [&](int level) {
    struct Res {
      int h, dr;
      double tau;
    } r{};
    switch (st.axis) {
      case StudyAxis::H:
        r = {level, st.fixed_dr_level, st.tau_ref};
        break;
      case StudyAxis::Dr:
        r = {st.fixed_h_level, level, st.tau_ref};
        break;
      case StudyAxis::Tau:
        r = {st.fixed_h_level, st.fixed_dr_level, st.tau_ref / std::pow(2.0, level)};
        break;
    }
    return r;
  };

  const auto ref_res = resolve(l_ref);
  const StudyRun reference = study_run(st, ref_res.h, ref_res.dr, ref_res.tau, st.eval_times);

  ConvergenceTable table;
  table.axis = st.axis;
  for (int level : st.levels) {
    const auto res = resolve(level);
    const StudyRun tested = study_run(st, res.h, res.dr, res.tau, st.eval_times);
    ConvergenceRow row;
    row.level = level;
    switch (st.axis) {
      case StudyAxis::H: {
        double h = 0.0;
        for (Index e = 0; e < tested.mesh.n_elements(); ++e)
          h = std::max(h, tested.mesh.element_diameter(e));
        row.resolution = h;
        break;
      }
      case StudyAxis::Dr:
        row.resolution = std::max(tested.rn.max_spacing(), tested.rp.max_spacing());
        break;
      case StudyAxis::Tau:
        row.resolution = res.tau;
        break;
    }
    for (size_t t = 0; t < st.eval_times.size(); ++t) {
      StateOnGrid sc{&tested.mesh, &tested.dofs, &tested.rn, &tested.rp, &tested.states[t]};
      StateOnGrid sf{&reference.mesh, &reference.dofs, &reference.rn, &reference.rp, &reference.states[t]};
      row.errors = error_norms(sc, sf); // last evaluation time wins
    }
    table.rows.push_back(row);
  }

  for (int n = 0; n < kNormCount; ++n) {
    std::vector<std::pair<int, double>> pts;
    for (const auto& row : table.rows) pts.emplace_back(row.level, row.errors[n]);
    table.fitted_order[n] = fit_order(pts);
    if (pts.size() >= 3) {
      std::vector<std::pair<int, double>> dropped(pts.begin() + 1, pts.end());
      table.order_drop_guard[n] = std::abs(fit_order(pts) - fit_order(dropped));
    }
  }
  return table;
}

void write_convergence_csv(const ConvergenceTable& table, std::ostream& out) {
  out << "level,resolution";
  for (int n = 0; n < kNormCount; ++n) out << ',' << norm_name(static_cast<ErrorNormKind>(n));
  out << '\n';
  out.precision(17);
  for (const auto& row : table.rows) {
    out << row.level << ',' << row.resolution;
    for (int n = 0; n < kNormCount; ++n) out << ',' << row.errors[n];
    out << '\n';
  }
  out << "order,";
  for (int n = 0; n < kNormCount; ++n) out << ',' << table.fitted_order[n];
  out << '\n';
}

std::string render_convergence_text(const ConvergenceTable& table) {
  std::ostringstream os;
  const char* axis = table.axis == StudyAxis::H ? "h" : (table.axis == StudyAxis::Dr ? "dr" : "tau");
  os << "Error and convergence order for " << axis << "\n";
  os << "level  resolution   ";
  for (int n = 0; n < kNormCount; ++n) {
    os.width(12);
    os << norm_name(static_cast<ErrorNormKind>(n));
  }
  os << '\n';
  os.setf(std::ios::scientific);
  os.precision(3);
  for (const auto& row : table.rows) {
    os.width(5);
    os << row.level << "  " << row.resolution << "  ";
    for (int n = 0; n < kNormCount; ++n) {
      os.width(12);
      os << row.errors[n];
    }
    os << '\n';
  }
  os << "order             ";
  os.unsetf(std::ios::scientific);
  os.precision(2);
  os.setf(std::ios::fixed);
  for (int n = 0; n < kNormCount; ++n) {
    os.width(12);
    os << table.fitted_order[n];
  }
  os << '\n';
  return os.str();
}

std::vector<BenchEntry> benchmark_solvers(const BenchSetup& setup) {
  const CellMesh mesh = build_laminate(setup.geometry);
  const RadialGrid rn = build_radial(setup.ps, SubdomainTag::Negative, setup.radial_n);
  const RadialGrid rp = build_radial(setup.ps, SubdomainTag::Positive, setup.radial_p);
  const DofMap dofs = build_dofmap(mesh, rn, rp);
  const RadialOperator rop_n = build_radial_operator(rn, setup.ps.k2_of(SubdomainTag::Negative), setup.tau);
  const RadialOperator rop_p = build_radial_operator(rp, setup.ps.k2_of(SubdomainTag::Positive), setup.tau);

  SimulationPlan plan;
  plan.t_end = setup.t_end;
  plan.tau = setup.tau;

  std::vector<BenchEntry> entries;
  std::optional<DiscreteState> anchor; // first converged kind's final state
  for (SolverKind kind : setup.kinds) {
    plan.solver = kind;
    BenchEntry entry;
    entry.kind = kind;
    double best_wall = std::numeric_limits<double>::infinity();
    bool ok = true;
    RunResult last;
    for (int rep = 0; rep < std::max(1, setup.repetitions); ++rep) {
      RunResult rr = run(plan, setup.ps, mesh, dofs, rop_n, rop_p, setup.solver_cfg);
      if (rr.failed) {
        entry.error = rr.error;
        ok = false;
        break;
      }
      best_wall = std::min(best_wall, rr.total_wall);
      last = std::move(rr);
    }
    entry.converged = ok;
    if (ok) {
      entry.wall_s = best_wall;
      entry.newton_total = last.total_newton_its;
      entry.avg_outer = static_cast<double>(last.total_outer_its) /
                        static_cast<double>(last.series.rows.size());
      entry.peak_order = last.peak_matrix_order;
      if (!anchor) anchor = last.final_state;
      entry.mismatch = state_distance(last.final_state, *anchor);
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

void write_benchmark_csv(const std::vector<BenchEntry>& entries, std::ostream& out) {
  out << "solver,converged,wall_s,newton_total,avg_outer,peak_order,mismatch\n";
  out.precision(17);
  for (const auto& e : entries) {
    out << solver_kind_name(e.kind) << ',' << (e.converged ? 1 : 0) << ',' << e.wall_s << ','
        << e.newton_total << ',' << e.avg_outer << ',' << e.peak_order << ',' << e.mismatch << '\n';
  }
}

std::string render_benchmark_text(const std::vector<BenchEntry>& entries) {
  std::ostringstream os;
  os << "solver     status  wall[s]    newton  avg_outer  peak_order  mismatch\n";
  for (const auto& e : entries) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-9s  %-6s  %-9.3g  %-6ld  %-9.2f  %-10ld  %.2e\n",
                  solver_kind_name(e.kind), e.converged ? "ok" : "DNF", e.wall_s, e.newton_total,
                  e.avg_outer, static_cast<long>(e.peak_order), e.mismatch);
    os << line;
  }
  for (const auto& e : entries)
    if (!e.converged) os << solver_kind_name(e.kind) << " DNF: " << e.error << '\n';
  return os.str();
}

} // namespace dfn
