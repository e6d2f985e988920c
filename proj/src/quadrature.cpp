#include "parest/quadrature.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "parest/errors.hpp"

namespace parest {

QuadratureRule gauss_legendre(int n) {
  if (n < 1) throw InvalidArgument("gauss_legendre: need at least one point");
  QuadratureRule rule;
  rule.dim = 1;
  rule.points.resize(n);
  rule.weights.resize(n);
  // Newton iteration on P_n from Chebyshev guesses, then map [-1,1] -> [0,1].
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.points[n - 1 - i] = Point(0.5 * (x + 1.0), 0.0);
    rule.weights[n - 1 - i] = 0.5 * w;
  }
  return rule;
}

QuadratureRule simplex_rule(int dim, int degree) {
  if (degree < 0) degree = 0;
  if (dim == 1) return gauss_legendre(degree / 2 + 1);
  if (dim != 2) throw InvalidArgument("simplex_rule: dim must be 1 or 2");
  // Collapsed map (u,v) -> (u, v(1-u)) has Jacobian (1-u), raising the u-degree by one.
  const int nu = (degree + 1) / 2 + 1;
  const int nv = degree / 2 + 1;
  const QuadratureRule gu = gauss_legendre(nu);
  const QuadratureRule gv = gauss_legendre(nv);
  QuadratureRule rule;
  rule.dim = 2;
  for (int i = 0; i < nu; ++i) {
    const double u = gu.points[i][0];
    for (int j = 0; j < nv; ++j) {
      const double v = gv.points[j][0];
      rule.points.emplace_back(u, v * (1.0 - u));
      rule.weights.push_back(gu.weights[i] * gv.weights[j] * (1.0 - u));
    }
  }
  return rule;
}

const QuadratureRule& cached_simplex_rule(int dim, int degree) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::unique_ptr<QuadratureRule>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[{dim, degree}];
  if (!slot) slot = std::make_unique<QuadratureRule>(simplex_rule(dim, degree));
  return *slot;
}

}  // namespace parest
