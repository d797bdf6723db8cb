#include "dfn/microsolver.hpp"

#include <cmath>

namespace dfn {

Vector TridiagonalMatrix::multiply(const Vector& x) const {
  const Index n = size();
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    double acc = diag(i) * x(i);
    if (i > 0) acc += off(i - 1) * x(i - 1);
    if (i + 1 < n) acc += off(i) * x(i + 1);
    y(i) = acc;
  }
  return y;
}

Matrix TridiagonalMatrix::dense() const {
  const Index n = size();
  Matrix D = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    D(i, i) = diag(i);
    if (i + 1 < n) {
      D(i, i + 1) = off(i);
      D(i + 1, i) = off(i);
    }
  }
  return D;
}

TridiagonalFactor TridiagonalFactor::compute(const TridiagonalMatrix& A) {
  const Index n = A.size();
  TridiagonalFactor f;
  f.d.resize(n);
  f.l.resize(n > 0 ? n - 1 : 0);
  f.d(0) = A.diag(0);
  for (Index i = 1; i < n; ++i) {
    if (!(f.d(i - 1) > 0.0))
      throw SolverError("tridiagonal factorization failed: nonpositive pivot at row " + std::to_string(i - 1));
    f.l(i - 1) = A.off(i - 1) / f.d(i - 1);
    f.d(i) = A.diag(i) - f.l(i - 1) * A.off(i - 1);
  }
  if (!(f.d(n - 1) > 0.0))
    throw SolverError("tridiagonal factorization failed: nonpositive pivot at last row");
  return f;
}

Vector TridiagonalFactor::solve(const Vector& b) const {
  const Index n = d.size();
  Vector x(n);
  x(0) = b(0);
  for (Index i = 1; i < n; ++i) x(i) = b(i) - l(i - 1) * x(i - 1);
  for (Index i = 0; i < n; ++i) x(i) /= d(i);
  for (Index i = n - 1; i-- > 0;) x(i) -= l(i) * x(i + 1);
  return x;
}

std::pair<TridiagonalMatrix, TridiagonalMatrix> radial_matrices(const RadialGrid& grid, double k2) {
  const Index n = grid.nodes.size();
  TridiagonalMatrix M, K;
  M.diag = Vector::Zero(n);
  M.off = Vector::Zero(n - 1);
  K.diag = Vector::Zero(n);
  K.off = Vector::Zero(n - 1);

  // 3-point Gauss per interval: exact for the degree-4 mass integrand.
  const double g = std::sqrt(3.0 / 5.0);
  const double xg[3] = {0.5 * (1.0 - g), 0.5, 0.5 * (1.0 + g)};
  const double wg[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

  for (Index e = 0; e + 1 < n; ++e) {
    const double a = grid.nodes(e), b = grid.nodes(e + 1);
    const double h = b - a;
    double m00 = 0, m01 = 0, m11 = 0, r2int = 0;
    for (int q = 0; q < 3; ++q) {
      const double r = a + h * xg[q];
      const double w = h * wg[q] * r * r;
      const double l0 = (b - r) / h;
      const double l1 = (r - a) / h;
      m00 += w * l0 * l0;
      m01 += w * l0 * l1;
      m11 += w * l1 * l1;
      r2int += w;
    }
    M.diag(e) += m00;
    M.diag(e + 1) += m11;
    M.off(e) += m01;
    const double ke = k2 * r2int / (h * h);
    K.diag(e) += ke;
    K.diag(e + 1) += ke;
    K.off(e) -= ke;
  }
  return {M, K};
}

RadialOperator build_radial_operator(const RadialGrid& grid, double k2, double tau) {
  RadialOperator op;
  op.grid = grid;
  op.k2 = k2;
  op.tau = tau;
  auto [M, K] = radial_matrices(grid, k2);
  op.M = std::move(M);
  op.K = std::move(K);
  op.A.diag = op.M.diag + tau * op.K.diag;
  op.A.off = op.M.off + tau * op.K.off;
  op.A_factor = TridiagonalFactor::compute(op.A);

  Vector eN = Vector::Zero(op.A.size());
  eN(eN.size() - 1) = 1.0;
  const Vector y = op.A_factor.solve(eN);
  op.surface_response = y(y.size() - 1);
  op.history_map = op.M.multiply(y); // M symmetric: e_N^T A^{-1} M = (M A^{-1} e_N)^T
  return op;
}

std::pair<double, Vector> surface_scalars(const RadialOperator& op) {
  return {op.surface_response, op.history_map};
}

Vector backward_recover(const RadialOperator& op, const Vector& C_prev, double J_hi) {
  Vector rhs = op.M.multiply(C_prev);
  rhs(rhs.size() - 1) -= J_hi;
  return op.A_factor.solve(rhs);
}

double particle_mass(const RadialOperator& op, const Vector& C) {
  return 4.0 * M_PI * op.M.multiply(C).sum();
}

} // namespace dfn
