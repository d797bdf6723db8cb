#include "dfn/quadrature.hpp"

#include <cmath>
#include <vector>

namespace dfn {

namespace {

QuadratureRule gauss_1d(int n_points) {
  // Gauss-Legendre abscissae on [-1,1], mapped to [0,1].
  std::vector<double> x, w;
  switch (n_points) {
    case 1:
      x = {0.0};
      w = {2.0};
      break;
    case 2: {
      const double p = 1.0 / std::sqrt(3.0);
      x = {-p, p};
      w = {1.0, 1.0};
      break;
    }
    case 3: {
      const double p = std::sqrt(3.0 / 5.0);
      x = {-p, 0.0, p};
      w = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
      break;
    }
    case 4: {
      const double p1 = std::sqrt(3.0 / 7.0 - 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
      const double p2 = std::sqrt(3.0 / 7.0 + 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
      const double w1 = (18.0 + std::sqrt(30.0)) / 36.0;
      const double w2 = (18.0 - std::sqrt(30.0)) / 36.0;
      x = {-p2, -p1, p1, p2};
      w = {w2, w1, w1, w2};
      break;
    }
    case 5: {
      const double p1 = std::sqrt(5.0 - 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
      const double p2 = std::sqrt(5.0 + 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
      const double w0 = 128.0 / 225.0;
      const double w1 = (322.0 + 13.0 * std::sqrt(70.0)) / 900.0;
      const double w2 = (322.0 - 13.0 * std::sqrt(70.0)) / 900.0;
      x = {-p2, -p1, 0.0, p1, p2};
      w = {w2, w1, w0, w1, w2};
      break;
    }
    default:
      throw ValidationError("unsupported 1D quadrature point count");
  }
  QuadratureRule rule;
  rule.points.resize(static_cast<Index>(x.size()), 1);
  rule.weights.resize(static_cast<Index>(x.size()));
  for (size_t i = 0; i < x.size(); ++i) {
    rule.points(static_cast<Index>(i), 0) = 0.5 * (x[i] + 1.0);
    rule.weights(static_cast<Index>(i)) = 0.5 * w[i];
  }
  return rule;
}

void push_symmetric(std::vector<std::array<double, 3>>& pts, double a, double w) {
  // three permutations of barycentric (a, a, 1-2a); w already per point
  const double b = 1.0 - 2.0 * a;
  pts.push_back({a, a, w});
  pts.push_back({b, a, w});
  pts.push_back({a, b, w});
}

QuadratureRule triangle_rule(int degree) {
  // (x, y, weight) with weights summing to 1, barycentric-symmetric sets.
  std::vector<std::array<double, 3>> pts;
  switch (degree) {
    case 0:
    case 1:
      pts.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0});
      break;
    case 2:
      push_symmetric(pts, 1.0 / 6.0, 1.0 / 3.0);
      break;
    case 3:
      pts.push_back({1.0 / 3.0, 1.0 / 3.0, -27.0 / 48.0});
      push_symmetric(pts, 1.0 / 5.0, 25.0 / 48.0);
      break;
    case 4:
      push_symmetric(pts, 0.445948490915965, 0.223381589678011);
      push_symmetric(pts, 0.091576213509771, 0.109951743655322);
      break;
    case 5:
      pts.push_back({1.0 / 3.0, 1.0 / 3.0, 0.225});
      push_symmetric(pts, 0.470142064105115, 0.132394152788506);
      push_symmetric(pts, 0.101286507323456, 0.125939180544827);
      break;
    default:
      throw ValidationError("unsupported triangle quadrature degree");
  }
  QuadratureRule rule;
  rule.points.resize(static_cast<Index>(pts.size()), 2);
  rule.weights.resize(static_cast<Index>(pts.size()));
  for (size_t i = 0; i < pts.size(); ++i) {
    rule.points(static_cast<Index>(i), 0) = pts[i][0];
    rule.points(static_cast<Index>(i), 1) = pts[i][1];
    rule.weights(static_cast<Index>(i)) = 0.5 * pts[i][2];
  }
  return rule;
}

} // namespace

QuadratureRule quadrature_rules(int dim, int degree) {
  if (degree < 0) throw ValidationError("quadrature degree must be non-negative");
  if (dim == 1) {
    const int n = degree / 2 + 1; // n-point Gauss exact to 2n-1
    if (n > 5) throw ValidationError("unsupported quadrature degree " + std::to_string(degree));
    return gauss_1d(n);
  }
  if (dim == 2) return triangle_rule(degree);
  throw ValidationError("quadrature dim must be 1 or 2");
}

} // namespace dfn
