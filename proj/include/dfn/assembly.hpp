#pragma once

#include "dfn/mesh.hpp"
#include "dfn/microsolver.hpp"
#include "dfn/params.hpp"
#include "dfn/quadrature.hpp"
#include "dfn/types.hpp"

#include <vector>

namespace dfn {

/// Global DOF bookkeeping. Ordering of the reduced unknown vector is
/// [c1 | phi1 | phi2 | c2bar per electrode element].
struct DofMap {
  Index n_c1 = 0;
  Index n_phi1 = 0;
  Index n_phi2 = 0;
  Index n_surf = 0;

  std::vector<Index> phi2_of_vertex;  // -1 where phi2 is not defined
  std::vector<Index> vertex_of_phi2;
  std::vector<Index> micro_of_element; // -1 for separator elements
  std::vector<Index> element_of_micro;
  std::vector<Index> micro_nodes;      // radial node count N_i per micro slot

  Index c1_offset() const { return 0; }
  Index phi1_offset() const { return n_c1; }
  Index phi2_offset() const { return n_c1 + n_phi1; }
  Index surf_offset() const { return n_c1 + n_phi1 + n_phi2; }
  Index n_macro() const { return n_c1 + n_phi1 + n_phi2; }
  Index n_total() const { return n_macro() + n_surf; }
  Index n_micro_total() const;   // sum of N_i
};

DofMap build_dofmap(const CellMesh& mesh, const RadialGrid& radial_n, const RadialGrid& radial_p);

/// DOF vectors of one time level. c2 holds one radial nodal vector per
/// electrode element (micro slot); its last entry is the surface value.
struct DiscreteState {
  Vector c1;
  Vector phi1;
  Vector phi2;
  std::vector<Vector> c2;

  double c2_surf(Index micro) const { return c2[micro](c2[micro].size() - 1); }
};

/// 2x2 block Jacobian of the reduced Step-1 system evaluated at a state:
/// [J_macro U_src; V_bdry D_micro] with diagonal D_micro.
struct BlockJacobian {
  Index n_macro = 0;
  SparseMat J_macro;
  std::vector<std::vector<std::pair<Index, double>>> U_src;  // per micro slot: (macro row, value)
  std::vector<std::vector<std::pair<Index, double>>> V_bdry; // per micro slot: (macro col, value)
  Vector D_micro;
};

/// Offsets of the active unknown blocks inside a (sub)system vector.
struct BlockLayout {
  bool has_c1 = false, has_phi1 = false, has_phi2 = false, has_surf = false;
  Index c1 = -1, phi1 = -1, phi2 = -1, surf = -1;
  Index n_macro = 0; // size of the [c1|phi1|phi2] part present
  Index size = 0;

  static BlockLayout make(const DofMap& dofs, bool c1, bool phi1, bool phi2, bool surf);
};

/// Where each chemistry argument is read from during assembly. Unknown
/// arguments come from the active vector and contribute Jacobian entries;
/// frozen ones are read from a supplied state.
enum class ArgSource { Unknown, Frozen };

struct EvalSources {
  ArgSource c1_in_J = ArgSource::Unknown;
  ArgSource c1_in_coeff = ArgSource::Unknown; // kappa1, kappa2 and grad ln(c1)
  ArgSource phi1 = ArgSource::Unknown;
  ArgSource phi2 = ArgSource::Unknown;
  ArgSource c2s_in_J = ArgSource::Unknown;
  ArgSource c2s_in_U = ArgSource::Unknown;

  static EvalSources all_unknown() { return {}; }
};

/// Per-facet applied current values (already conservation-projected),
/// aligned with mesh.boundary_facets; entries must be 0 on insulated facets.
struct BoundaryCurrent {
  std::vector<double> facet_values;
};

struct AssemblyContext {
  const ParameterSet* ps = nullptr;
  const CellMesh* mesh = nullptr;
  const DofMap* dofs = nullptr;
  const RadialOperator* rop[2] = {nullptr, nullptr}; // per electrode_index
  double tau = 0.0;
  BoundaryCurrent current;

  const RadialOperator& radial_op(SubdomainTag tag) const { return *rop[electrode_index(tag)]; }
};

/// Test hooks. chemistry_zero forces J and all its partials to 0;
/// freeze_coefficients evaluates kappa and the 1/c1 denominator at
/// `frozen` while keeping grad c1 live; drop_ln_term removes the
/// kappa2 grad ln(c1) term entirely.
struct AssemblyHooks {
  bool chemistry_zero = false;
  bool freeze_coefficients = false;
  bool drop_ln_term = false;
};

struct EvalPlan {
  BlockLayout layout;
  EvalSources sources;
  const DiscreteState* frozen = nullptr;    // values for Frozen arguments
  const DiscreteState* frozen_u = nullptr;  // c2s_in_U when Frozen (defaults to frozen)
  const DiscreteState* prev = nullptr;      // time level k-1
  AssemblyHooks hooks;
};

/// Assembled (sub)system at an iterate x packed per plan.layout. The
/// surface coupling stays separated so the caller chooses between Schur
/// elimination and the unreduced matrix.
struct AssembledSystem {
  Vector residual;
  std::vector<Triplet> macro; // over the layout's macro part
  std::vector<std::vector<std::pair<Index, double>>> u_cols;
  std::vector<std::vector<std::pair<Index, double>>> v_rows;
  Vector w_diag;
};

AssembledSystem assemble_system(const AssemblyContext& ctx, const EvalPlan& plan, const Vector& x,
                                bool want_jacobian);

/// Pack/unpack between a DiscreteState and a layout vector (surface block
/// holds the last radial entry of each micro slot).
Vector pack_state(const DofMap& dofs, const BlockLayout& layout, const DiscreteState& s);
void unpack_state(const DofMap& dofs, const BlockLayout& layout, const Vector& x, DiscreteState& s);

/// Spec-facing full residual over [c1|phi1|phi2|c2bar] at state_k, with the
/// applied current evaluated at t_k and conservation-projected.
Vector assemble_residual(const ParameterSet& ps, const CellMesh& mesh, const RadialOperator& rop_n,
                         const RadialOperator& rop_p, const DiscreteState& state_k,
                         const DiscreteState& state_prev, double tau, double t_k);

BlockJacobian assemble_jacobian(const ParameterSet& ps, const CellMesh& mesh, const RadialOperator& rop_n,
                                const RadialOperator& rop_p, const DiscreteState& state_k,
                                const DiscreteState& state_prev, double tau, double t_k);

/// int_{Omega2} a2 J_h dx under the same (degree-4) quadrature as assembly.
double discrete_source_balance(const ParameterSet& ps, const CellMesh& mesh, const RadialOperator& rop_n,
                               const RadialOperator& rop_p, const DiscreteState& state);

/// int_{Omega2} a2 |J_h| dx, the scale partner of discrete_source_balance.
double discrete_source_scale(const ParameterSet& ps, const CellMesh& mesh, const RadialOperator& rop_n,
                             const RadialOperator& rop_p, const DiscreteState& state);

/// Per-facet current values from the program value I(t): +I on GammaP and
/// -I * |GammaP|/|GammaN| on GammaN (discharge positive out of GammaP).
BoundaryCurrent galvanostatic_load(const CellMesh& mesh, double I_value);

} // namespace dfn
