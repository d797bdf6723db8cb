#include "dfn/timeloop.hpp"

#include <cmath>
#include <istream>
#include <ostream>

namespace dfn {

BoundaryCurrent project_current(const BoundaryCurrent& raw, const CellMesh& mesh) {
  if (raw.facet_values.size() != mesh.boundary_facets.size())
    throw ValidationError("project_current: value list not aligned with boundary facets");
  double measure = 0.0, integral = 0.0;
  for (size_t i = 0; i < mesh.boundary_facets.size(); ++i) {
    const BoundaryFacet& f = mesh.boundary_facets[i];
    if (f.tag == FacetTag::Insulated) continue;
    const double w = mesh.facet_measure(f);
    measure += w;
    integral += w * raw.facet_values[i];
  }
  if (measure <= 0.0) throw ValidationError("project_current: Gamma is empty");
  const double mean = integral / measure;
  BoundaryCurrent out = raw;
  if (mean == 0.0) return out; // idempotent and exact on balanced input
  for (size_t i = 0; i < mesh.boundary_facets.size(); ++i)
    if (mesh.boundary_facets[i].tag != FacetTag::Insulated) out.facet_values[i] -= mean;
  return out;
}

double gamma_integral(const BoundaryCurrent& current, const CellMesh& mesh) {
  double acc = 0.0;
  for (size_t i = 0; i < mesh.boundary_facets.size(); ++i) {
    const BoundaryFacet& f = mesh.boundary_facets[i];
    if (f.tag == FacetTag::Insulated) continue;
    acc += mesh.facet_measure(f) * current.facet_values[i];
  }
  return acc;
}

DiscreteState initialize_state(const ParameterSet& ps, const CellMesh& mesh, const DofMap& dofs,
                               const RadialOperator& rop_n, const RadialOperator& rop_p,
                               const SolverConfig& cfg) {
  DiscreteState s;
  s.c1.resize(dofs.n_c1);
  s.phi1 = Vector::Zero(dofs.n_phi1);
  s.phi2.resize(dofs.n_phi2);
  s.c2.resize(dofs.n_surf);

  // Vertex values from the containing subdomains; electrodes win at interfaces.
  std::vector<int> rank(dofs.n_c1, -1);
  for (Index e = 0; e < mesh.n_elements(); ++e) {
    const Element& el = mesh.elements[e];
    const int r = is_electrode(el.tag) ? 1 : 0;
    for (int i = 0; i < mesh.verts_per_element(); ++i) {
      const Index v = el.v[i];
      if (r > rank[v]) {
        rank[v] = r;
        s.c1(v) = ps.c10_of(el.tag);
      }
    }
  }

  std::vector<double> u0(dofs.n_phi2, 0.0);
  for (Index m = 0; m < dofs.n_surf; ++m) {
    const Element& el = mesh.elements[dofs.element_of_micro[m]];
    const double c20 = ps.c20_of(el.tag);
    s.c2[m] = Vector::Constant(dofs.micro_nodes[m], c20);
    for (int i = 0; i < mesh.verts_per_element(); ++i)
      u0[dofs.phi2_of_vertex[el.v[i]]] = ocp_value(ps, el.tag, c20);
  }
  for (Index p = 0; p < dofs.n_phi2; ++p) s.phi2(p) = u0[p]; // eta = 0 initial guess

  // One decoupled potential solve at t = 0 with concentrations frozen.
  BoundaryCurrent load = project_current(galvanostatic_load(mesh, ps.current.value_at(0.0)), mesh);
  AssemblyContext actx;
  actx.ps = &ps;
  actx.mesh = &mesh;
  actx.dofs = &dofs;
  actx.rop[0] = &rop_n;
  actx.rop[1] = &rop_p;
  actx.tau = 1.0; // unused: no c1 or surface rows in this solve
  actx.current = load;

  EvalPlan plan;
  plan.layout = BlockLayout::make(dofs, false, true, true, false);
  plan.sources.c1_in_J = ArgSource::Frozen;
  plan.sources.c1_in_coeff = ArgSource::Frozen;
  plan.sources.phi1 = ArgSource::Unknown;
  plan.sources.phi2 = ArgSource::Unknown;
  plan.sources.c2s_in_J = ArgSource::Frozen;
  plan.sources.c2s_in_U = ArgSource::Frozen;
  plan.frozen = &s;

  SolverReport report;
  NewtonCallbacks cb;
  cb.residual = [&](const Vector& x) { return assemble_system(actx, plan, x, false).residual; };
  cb.direction = [&](const Vector& x, const Vector& F) -> Vector {
    AssembledSystem sys = assemble_system(actx, plan, x, true);
    Vector rhs = -F;
    std::vector<Triplet> trips = std::move(sys.macro);
    fix_nullspace(trips, rhs, plan.layout.phi2 + cfg.pin_phi2_dof, plan.layout.size);
    SparseMat A(plan.layout.size, plan.layout.size);
    A.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<SparseMat, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) throw SolverError("initialization: factorization failed");
    return lu.solve(rhs);
  };
  Vector x = pack_state(dofs, plan.layout, s);
  try {
    x = newton_solve(cb, std::move(x), cfg, report);
  } catch (const SolverError& err) {
    throw SolverError(std::string("initialization Newton failed: ") + err.what());
  }
  unpack_state(dofs, plan.layout, x, s);
  shift_mean(mesh, s);
  return s;
}

double cell_voltage(const CellMesh& mesh, const DofMap& dofs, const DiscreteState& state) {
  double mp = 0, wp = 0, mn = 0, wn = 0;
  for (const BoundaryFacet& f : mesh.boundary_facets) {
    if (f.tag == FacetTag::Insulated) continue;
    const double w = mesh.facet_measure(f);
    double phi = state.phi2(dofs.phi2_of_vertex[f.v[0]]);
    if (mesh.dim == 2) phi = 0.5 * (phi + state.phi2(dofs.phi2_of_vertex[f.v[1]]));
    if (f.tag == FacetTag::GammaP) {
      mp += w * phi;
      wp += w;
    } else {
      mn += w * phi;
      wn += w;
    }
  }
  return mp / wp - mn / wn;
}

RunResult run(const SimulationPlan& plan, const ParameterSet& ps, const CellMesh& mesh,
              const DofMap& dofs, const RadialOperator& rop_n, const RadialOperator& rop_p,
              const SolverConfig& cfg, const std::vector<int>& keep_steps) {
  if (!(plan.tau > 0.0) || !(plan.t_end >= plan.tau))
    throw ValidationError("simulation plan requires 0 < tau <= t_end");
  RunResult out;
  DiscreteState state = initialize_state(ps, mesh, dofs, rop_n, rop_p, cfg);
  const int K = static_cast<int>(std::floor(plan.t_end / plan.tau + 1e-12));

  for (int k = 1; k <= K; ++k) {
    const double t_k = k * plan.tau;
    const BoundaryCurrent load =
        project_current(galvanostatic_load(mesh, ps.current.value_at(t_k)), mesh);
    StepResult step;
    try {
      step = solve_step(plan.solver, ps, mesh, dofs, rop_n, rop_p, state, plan.tau, t_k, cfg, load);
    } catch (const SolverError& err) {
      out.failed = true;
      out.failed_step = k;
      out.error = "step " + std::to_string(k) + ": " + err.what();
      break;
    }
    state = std::move(step.state);

    TimeStepRecord rec;
    rec.step = k;
    rec.t = t_k;
    rec.voltage = cell_voltage(mesh, dofs, state);
    rec.c1_min = state.c1.minCoeff();
    rec.c1_max = state.c1.maxCoeff();
    double smin = std::numeric_limits<double>::infinity(), smax = -smin;
    for (Index m = 0; m < dofs.n_surf; ++m) {
      smin = std::min(smin, state.c2_surf(m));
      smax = std::max(smax, state.c2_surf(m));
    }
    rec.c2surf_min = smin;
    rec.c2surf_max = smax;
    rec.source_balance = discrete_source_balance(ps, mesh, rop_n, rop_p, state);
    rec.outer_its = step.report.outer_iterations;
    rec.newton_its = step.report.newton_iterations_total;
    rec.wall_s = step.report.wall_time;
    out.series.rows.push_back(rec);

    out.total_newton_its += step.report.newton_iterations_total;
    out.total_outer_its += step.report.outer_iterations;
    out.total_wall += step.report.wall_time;
    out.peak_matrix_order = std::max(out.peak_matrix_order, step.report.peak_matrix_order);

    for (int ks : keep_steps)
      if (ks == k) out.kept_states.emplace_back(k, state);
  }
  out.final_state = std::move(state);
  return out;
}

void write_timeseries_csv(const TimeSeries& series, std::ostream& out) {
  out << "t,voltage,c1_min,c1_max,c2surf_min,c2surf_max,source_balance,outer_its,newton_its,wall_s\n";
  out.precision(17);
  for (const TimeStepRecord& r : series.rows) {
    out << r.t << ',' << r.voltage << ',' << r.c1_min << ',' << r.c1_max << ',' << r.c2surf_min << ','
        << r.c2surf_max << ',' << r.source_balance << ',' << r.outer_its << ',' << r.newton_its << ','
        << r.wall_s << '\n';
  }
}

void write_snapshot(const DiscreteState& state, std::ostream& out) {
  out.precision(17);
  out << "dfn-state 1\n";
  auto vec = [&](const char* name, const Vector& v) {
    out << name << ' ' << v.size() << '\n';
    for (Index i = 0; i < v.size(); ++i) out << v(i) << '\n';
  };
  vec("c1", state.c1);
  vec("phi1", state.phi1);
  vec("phi2", state.phi2);
  out << "c2 " << state.c2.size() << '\n';
  for (const Vector& c : state.c2) {
    out << c.size() << '\n';
    for (Index i = 0; i < c.size(); ++i) out << c(i) << '\n';
  }
}

DiscreteState read_snapshot(std::istream& in) {
  std::string word;
  int version = 0;
  in >> word >> version;
  if (word != "dfn-state" || version != 1) throw ValidationError("not a dfn-state snapshot");
  DiscreteState s;
  auto vec = [&](const char* name, Vector& v) {
    Index n = 0;
    in >> word >> n;
    if (word != name) throw ValidationError("bad snapshot section, expected " + std::string(name));
    v.resize(n);
    for (Index i = 0; i < n; ++i) in >> v(i);
  };
  vec("c1", s.c1);
  vec("phi1", s.phi1);
  vec("phi2", s.phi2);
  Index slots = 0;
  in >> word >> slots;
  if (word != "c2") throw ValidationError("bad snapshot section, expected c2");
  s.c2.resize(slots);
  for (Index m = 0; m < slots; ++m) {
    Index n = 0;
    in >> n;
    s.c2[m].resize(n);
    for (Index i = 0; i < n; ++i) in >> s.c2[m](i);
  }
  if (!in) throw ValidationError("truncated snapshot");
  return s;
}

double electrolyte_lithium(const ParameterSet& ps, const CellMesh& mesh, const DiscreteState& state) {
  double acc = 0.0;
  const int nv = mesh.verts_per_element();
  for (Index e = 0; e < mesh.n_elements(); ++e) {
    const Element& el = mesh.elements[e];
    double s = 0.0;
    for (int i = 0; i < nv; ++i) s += state.c1(el.v[i]);
    acc += ps.eps1_of(el.tag) * mesh.element_volume(e) * s / nv;
  }
  return acc;
}

double particle_lithium(const ParameterSet& ps, const CellMesh& mesh, const DofMap& dofs,
                        const RadialOperator& rop_n, const RadialOperator& rop_p,
                        const DiscreteState& state) {
  double acc = 0.0;
  for (Index m = 0; m < dofs.n_surf; ++m) {
    const Element& el = mesh.elements[dofs.element_of_micro[m]];
    const RadialOperator& op = el.tag == SubdomainTag::Negative ? rop_n : rop_p;
    const double weight = ps.a1_of(el.tag) * ps.F / (ps.Rs_of(el.tag) * ps.Rs_of(el.tag));
    acc += weight * mesh.element_volume(dofs.element_of_micro[m]) * op.M.multiply(state.c2[m]).sum();
  }
  return acc;
}

} // namespace dfn
