#pragma once

#include "dfn/types.hpp"

namespace dfn {

/// Quadrature on the reference element: [0,1] in 1D, the unit triangle
/// {(0,0),(1,0),(0,1)} in 2D. Weights include the reference measure, so they
/// sum to 1 resp. 1/2.
struct QuadratureRule {
  Matrix points;  // n x dim
  Vector weights; // n

  Index size() const { return weights.size(); }
};

/// Exact for polynomials up to `degree`. Supported: degree <= 9 in 1D,
/// degree <= 5 on triangles.
QuadratureRule quadrature_rules(int dim, int degree);

} // namespace dfn
