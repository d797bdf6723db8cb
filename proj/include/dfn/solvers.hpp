#pragma once

#include "dfn/assembly.hpp"

#include <functional>
#include <string>
#include <vector>

namespace dfn {

enum class SolverKind { TwoDS_FC, TwoDS_Eta, OneDS_Eta, GSN_FC, GSN_Macro, GSN_Phi, GSN_FD };

SolverKind solver_kind_from_string(const std::string& name);
const char* solver_kind_name(SolverKind kind);

struct SolverConfig {
  double newton_abs_tol = 1e-13;
  double newton_rel_tol = 1e-11;
  double outer_rtol = 1e-10;
  int max_newton = 50;
  int max_outer = 200;
  double backtrack_factor = 0.5;
  int max_halvings = 25;
  double armijo_c = 1e-4;
  double update_norm_floor = 1e-12; // times the block scale, floors the relative-update denominator
  Index pin_phi2_dof = 0;           // fixing-one-point target, a phi2 DOF index
};

struct SolverReport {
  int outer_iterations = 0;
  long newton_iterations_total = 0;
  long linear_solves = 0;
  std::vector<double> residual_history; // of the most recent Newton solve
  double wall_time = 0.0;
  Index peak_matrix_order = 0;
};

/// Callbacks of one Newton system. residual may throw ChemistryDomainError
/// on inadmissible trial states; the line search halves the step in response.
/// direction solves J d = -F at x. floor_hint, when set, estimates the
/// attainable residual norm (matrix scale times machine epsilon); a stalled
/// line search at that floor counts as converged rather than failed.
struct NewtonCallbacks {
  std::function<Vector(const Vector&)> residual;
  std::function<Vector(const Vector&, const Vector&)> direction;
  std::function<double()> floor_hint;
};

/// Damped Newton iteration: accepts when the residual 2-norm falls below
/// newton_abs_tol or the guarded relative update falls below newton_rel_tol.
Vector newton_solve(const NewtonCallbacks& sys, Vector x0, const SolverConfig& cfg, SolverReport& report);

/// Guarded l_inf relative update between iterates.
double relative_update(const Vector& x_new, const Vector& x_old, double floor_factor);

/// Fixing-one-point: zero row and column `pin`, unit diagonal, zero rhs.
void fix_nullspace(std::vector<Triplet>& triplets, Vector& rhs, Index pin, Index n);

/// Common shift C = -mean(phi1) added to BOTH potentials; establishes
/// int phi1 = 0 and leaves eta (and every residual) unchanged.
double shift_mean(const CellMesh& mesh, DiscreteState& state);

/// Exact P1 quadrature mean of phi1 over Omega.
double phi1_mean(const CellMesh& mesh, const DiscreteState& state);

struct StepResult {
  DiscreteState state;
  SolverReport report;
};

/// One backward Euler step with the selected decomposition. `current` must
/// already be conservation-projected.
StepResult solve_step(SolverKind kind, const ParameterSet& ps, const CellMesh& mesh, const DofMap& dofs,
                      const RadialOperator& rop_n, const RadialOperator& rop_p, const DiscreteState& prev,
                      double tau, double t_k, const SolverConfig& cfg, const BoundaryCurrent& current);

StepResult solve_step_2ds_fc(const ParameterSet& ps, const CellMesh& mesh, const DofMap& dofs,
                             const RadialOperator& rop_n, const RadialOperator& rop_p,
                             const DiscreteState& prev, double tau, double t_k, const SolverConfig& cfg,
                             const BoundaryCurrent& current);

StepResult solve_step_eta(bool eliminate_surface, const ParameterSet& ps, const CellMesh& mesh,
                          const DofMap& dofs, const RadialOperator& rop_n, const RadialOperator& rop_p,
                          const DiscreteState& prev, double tau, double t_k, const SolverConfig& cfg,
                          const BoundaryCurrent& current);

StepResult solve_step_gsn(SolverKind kind, const ParameterSet& ps, const CellMesh& mesh, const DofMap& dofs,
                          const RadialOperator& rop_n, const RadialOperator& rop_p,
                          const DiscreteState& prev, double tau, double t_k, const SolverConfig& cfg,
                          const BoundaryCurrent& current);

/// Schur fold of the surface block (Jacobian elimination, element by
/// element): macro triplets gain -u w^{-1} v and the macro rhs gains
/// -u w^{-1} F_surf. Returns the eliminated rhs.
Vector eliminate_surface_block(const AssembledSystem& sys, const BlockLayout& layout,
                               std::vector<Triplet>& macro_triplets);

/// l_inf distance between two states relative to per-block scales; used by
/// cross-solver fixed-point checks.
double state_distance(const DiscreteState& a, const DiscreteState& b);

} // namespace dfn
