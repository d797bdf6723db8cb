#pragma once

#include "dfn/solvers.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dfn {

struct SimulationPlan {
  double t_end = 0.0;
  double tau = 0.0; // uniform step
  SolverKind solver = SolverKind::TwoDS_FC;
  int snapshot_every = 0; // steps; 0 disables snapshots
  std::string snapshot_dir;
};

struct TimeStepRecord {
  int step = 0;
  double t = 0.0;
  double voltage = 0.0;
  double c1_min = 0.0, c1_max = 0.0;
  double c2surf_min = 0.0, c2surf_max = 0.0;
  double source_balance = 0.0;
  int outer_its = 0;
  long newton_its = 0;
  double wall_s = 0.0;
};

struct TimeSeries {
  std::vector<TimeStepRecord> rows;
};

struct RunResult {
  TimeSeries series;
  DiscreteState final_state;
  std::vector<std::pair<int, DiscreteState>> kept_states; // (step, state) for requested steps
  bool failed = false;
  int failed_step = 0;
  std::string error;
  long total_newton_its = 0;
  long total_outer_its = 0;
  double total_wall = 0.0;
  Index peak_matrix_order = 0;
};

/// Mean removal over Gamma: I* = I - (1/|Gamma|) int_Gamma I ds, computed
/// with the facet measures (unit point weights in 1D). Entries off Gamma
/// stay zero. Idempotent on zero-mean input.
BoundaryCurrent project_current(const BoundaryCurrent& raw, const CellMesh& mesh);

/// Quadrature value of int_Gamma I ds for a per-facet current.
double gamma_integral(const BoundaryCurrent& current, const CellMesh& mesh);

/// c1 = c10, c2 = c20 per subdomain; potentials from one decoupled solve at
/// t=0 with the concentrations frozen, then mean-shifted.
DiscreteState initialize_state(const ParameterSet& ps, const CellMesh& mesh, const DofMap& dofs,
                               const RadialOperator& rop_n, const RadialOperator& rop_p,
                               const SolverConfig& cfg);

/// phi2 mean over GammaP minus mean over GammaN (facet-measure weighted).
double cell_voltage(const CellMesh& mesh, const DofMap& dofs, const DiscreteState& state);

/// Backward Euler marching with the selected solver; K = floor(t_end/tau)
/// steps. A solver failure stops the run and returns the partial series.
RunResult run(const SimulationPlan& plan, const ParameterSet& ps, const CellMesh& mesh,
              const DofMap& dofs, const RadialOperator& rop_n, const RadialOperator& rop_p,
              const SolverConfig& cfg, const std::vector<int>& keep_steps = {});

void write_timeseries_csv(const TimeSeries& series, std::ostream& out);

/// Plain-text full-precision DOF dump for exact replay.
void write_snapshot(const DiscreteState& state, std::ostream& out);
DiscreteState read_snapshot(std::istream& in);

/// int eps1 c1 dx (exact P1 quadrature).
double electrolyte_lithium(const ParameterSet& ps, const CellMesh& mesh, const DiscreteState& state);

/// sum over electrode elements of (a1 F / Rs^2) |e| 1^T M C_e; the partner of
/// electrolyte_lithium whose sum is conserved by the discrete scheme.
double particle_lithium(const ParameterSet& ps, const CellMesh& mesh, const DofMap& dofs,
                        const RadialOperator& rop_n, const RadialOperator& rop_p,
                        const DiscreteState& state);

} // namespace dfn
