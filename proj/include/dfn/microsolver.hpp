#pragma once

#include "dfn/mesh.hpp"
#include "dfn/types.hpp"

#include <utility>

namespace dfn {

/// Symmetric tridiagonal matrix (diagonal + one off-diagonal band).
struct TridiagonalMatrix {
  Vector diag;
  Vector off;

  Index size() const { return diag.size(); }
  Vector multiply(const Vector& x) const;
  Matrix dense() const;
};

/// LDL^T factorization without pivoting; valid for positive definite input.
struct TridiagonalFactor {
  Vector d;
  Vector l;

  static TridiagonalFactor compute(const TridiagonalMatrix& A);
  Vector solve(const Vector& b) const;
};

/// r^2-weighted P1 mass and stiffness matrices on a radial grid:
/// M_ij = int psi_i psi_j r^2 dr, K_ij = int k2 psi_i' psi_j' r^2 dr.
/// Entries are exact (Gauss rule of sufficient degree on each interval).
std::pair<TridiagonalMatrix, TridiagonalMatrix> radial_matrices(const RadialGrid& grid, double k2);

/// Per-particle radial operator for one (grid, k2, tau) combination; shared
/// by every element of the same electrode. Immutable once built.
struct RadialOperator {
  RadialGrid grid;
  double k2 = 0.0;
  double tau = 0.0;
  TridiagonalMatrix M;
  TridiagonalMatrix K;
  TridiagonalMatrix A; // M + tau K
  TridiagonalFactor A_factor;
  double surface_response = 0.0; // e_N^T A^{-1} e_N
  Vector history_map;            // row e_N^T A^{-1} M

  Index n_nodes() const { return grid.nodes.size(); }
};

RadialOperator build_radial_operator(const RadialGrid& grid, double k2, double tau);

/// (surface_response, history_map) from the cached factorization.
std::pair<double, Vector> surface_scalars(const RadialOperator& op);

/// Step 2: solve A C = M C_prev - J_hi e_N for the full radial vector.
Vector backward_recover(const RadialOperator& op, const Vector& C_prev, double J_hi);

/// 4 pi int c2 r^2 dr = 4 pi 1^T M C (moles per particle).
double particle_mass(const RadialOperator& op, const Vector& C);

} // namespace dfn
