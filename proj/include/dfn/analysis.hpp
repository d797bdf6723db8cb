#pragma once

#include "dfn/timeloop.hpp"

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace dfn {

/// The six error measures of the convergence studies. Radial norms carry the
/// r^2 weight; H1r includes the L2r part.
enum class ErrorNormKind : int {
  H1_c1 = 0,
  H1_phi1 = 1,
  H1_phi2 = 2,
  L2_surf_c2 = 3,
  L2_L2r_c2 = 4,
  L2_H1r_c2 = 5,
};

constexpr int kNormCount = 6;
const char* norm_name(ErrorNormKind kind);

using NormValues = std::array<double, kNormCount>;

struct StateOnGrid {
  const CellMesh* mesh = nullptr;
  const DofMap* dofs = nullptr;
  const RadialGrid* radial_n = nullptr;
  const RadialGrid* radial_p = nullptr;
  const DiscreteState* state = nullptr;
};

/// All six error norms between a coarse state and a reference on a nested
/// refinement. Integrals run on the fine mesh; the coarse solution enters
/// through its own FE interpolant (no projection).
NormValues error_norms(const StateOnGrid& coarse, const StateOnGrid& fine);

enum class StudyAxis { H, Dr, Tau };

StudyAxis study_axis_from_string(const std::string& name);

struct StudySetup {
  ParameterSet ps;
  GeometrySpec geometry;      // level-0 macro mesh
  RadialSpec radial_n, radial_p;
  SolverConfig solver_cfg;
  SolverKind solver = SolverKind::TwoDS_FC;
  StudyAxis axis = StudyAxis::H;
  std::vector<int> levels;    // tested levels, ascending
  int ref_extra = 2;          // reference level = max(levels) + ref_extra
  double t_end = 0.0;
  double tau_ref = 0.0;       // time step of every run (H and Dr axes); coarsest tau at level 0 (Tau axis)
  int fixed_h_level = 0;      // spatial level shared by all runs when axis != H
  int fixed_dr_level = 0;     // radial level shared by all runs when axis != Dr
  std::vector<double> eval_times; // defaults to {t_end}
};

struct ConvergenceRow {
  int level = 0;
  double resolution = 0.0; // h, max dr, or tau of this level
  NormValues errors{};     // at the last evaluation time
};

struct ConvergenceTable {
  StudyAxis axis = StudyAxis::H;
  std::vector<ConvergenceRow> rows;
  NormValues fitted_order{};    // least-squares slope over the last <=3 levels
  NormValues order_drop_guard{}; // |order(all rows) - order(without coarsest)|
};

/// Reference-solution convergence harness: runs every tested level plus the
/// reference, transfers through nested evaluation, fits observed orders.
ConvergenceTable convergence_study(const StudySetup& setup);

void write_convergence_csv(const ConvergenceTable& table, std::ostream& out);
std::string render_convergence_text(const ConvergenceTable& table);

struct BenchSetup {
  ParameterSet ps;
  GeometrySpec geometry;
  RadialSpec radial_n, radial_p;
  SolverConfig solver_cfg;
  std::vector<SolverKind> kinds;
  double t_end = 0.0;
  double tau = 0.0;
  int repetitions = 1;
};

struct BenchEntry {
  SolverKind kind = SolverKind::TwoDS_FC;
  bool converged = false;
  std::string error;
  double wall_s = 0.0;   // best of repetitions
  long newton_total = 0;
  double avg_outer = 0.0;
  Index peak_order = 0;
  double mismatch = 0.0; // final-state distance to the first converged kind
};

/// Runs every kind on the identical plan; fixed-point agreement is recorded
/// per kind before any timing claim. A non-converging kind is reported as
/// DNF, not fatal.
std::vector<BenchEntry> benchmark_solvers(const BenchSetup& setup);

void write_benchmark_csv(const std::vector<BenchEntry>& entries, std::ostream& out);
std::string render_benchmark_text(const std::vector<BenchEntry>& entries);

/// Least-squares slope of log2(err) against level over the last <=3 rows.
double fit_order(const std::vector<std::pair<int, double>>& level_error);

} // namespace dfn
