#pragma once

#include <vector>

#include "parest/common.hpp"

namespace parest {

/// Points and weights on a reference domain: [0,1] in 1D, the unit triangle in 2D.
/// Weights sum to the reference measure (1 and 1/2 respectively).
struct QuadratureRule {
  int dim = 1;
  std::vector<Point> points;
  std::vector<double> weights;
  int size() const { return static_cast<int>(weights.size()); }
};

/// n-point Gauss-Legendre rule mapped to [0,1].
QuadratureRule gauss_legendre(int n);

/// Rule on the reference simplex exact for polynomials of total degree <= degree.
/// 2D rules are collapsed (Duffy) tensor products of Gauss-Legendre rules.
QuadratureRule simplex_rule(int dim, int degree);

/// Cached version of simplex_rule; the returned reference stays valid for the process lifetime.
const QuadratureRule& cached_simplex_rule(int dim, int degree);

}  // namespace parest
