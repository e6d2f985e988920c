#include "parest/lagrange.hpp"

#include <Eigen/LU>
#include <cmath>
#include <memory>

#include "parest/errors.hpp"

namespace parest {

LagrangeBasis::LagrangeBasis(int dim, int degree) : dim_(dim), degree_(degree) {
  if (dim != 1 && dim != 2) throw InvalidArgument("LagrangeBasis: dim must be 1 or 2");
  if (degree < 0) throw InvalidArgument("LagrangeBasis: negative degree");
  const int p = degree;
  if (dim == 1) {
    for (int a = 0; a <= p; ++a) {
      lattice_.push_back({p - a, a, 0});
      exponents_.push_back({a, 0});
    }
  } else {
    for (int b = 0; b <= p; ++b)
      for (int a = 0; a + b <= p; ++a) lattice_.push_back({p - a - b, a, b});
    for (int total = 0; total <= p; ++total)
      for (int b = 0; b <= total; ++b) exponents_.push_back({total - b, b});
  }
  const int n = size();
  Matrix vandermonde(n, n);
  for (int i = 0; i < n; ++i) {
    const Point x = node(i);
    for (int j = 0; j < n; ++j)
      vandermonde(i, j) = std::pow(x[0], exponents_[j][0]) * std::pow(x[1], exponents_[j][1]);
  }
  coeffs_ = vandermonde.fullPivLu().inverse();
}

Point LagrangeBasis::node(int i) const {
  if (degree_ == 0) return dim_ == 1 ? Point(0.5, 0.0) : Point(1.0 / 3.0, 1.0 / 3.0);
  return Point(static_cast<double>(lattice_[i][1]) / degree_,
               static_cast<double>(lattice_[i][2]) / degree_);
}

namespace {
double ipow(double x, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= x;
  return r;
}
}  // namespace

Vector LagrangeBasis::values(const Point& xi) const {
  const int n = size();
  Vector mono(n);
  for (int j = 0; j < n; ++j) mono[j] = ipow(xi[0], exponents_[j][0]) * ipow(xi[1], exponents_[j][1]);
  return coeffs_.transpose() * mono;
}

Matrix LagrangeBasis::gradients(const Point& xi) const {
  const int n = size();
  Matrix mono(n, 2);
  for (int j = 0; j < n; ++j) {
    const int a = exponents_[j][0], b = exponents_[j][1];
    mono(j, 0) = a > 0 ? a * ipow(xi[0], a - 1) * ipow(xi[1], b) : 0.0;
    mono(j, 1) = b > 0 ? b * ipow(xi[0], a) * ipow(xi[1], b - 1) : 0.0;
  }
  return (coeffs_.transpose() * mono).transpose();
}

const LagrangeBasis& lagrange_basis(int dim, int degree) {
  constexpr int kMaxDegree = 8;
  if ((dim != 1 && dim != 2) || degree < 0 || degree > kMaxDegree)
    throw InvalidArgument("lagrange_basis: unsupported dim/degree");
  static const auto table = [] {
    std::vector<std::unique_ptr<LagrangeBasis>> t;
    for (int d = 1; d <= 2; ++d)
      for (int p = 0; p <= kMaxDegree; ++p) t.push_back(std::make_unique<LagrangeBasis>(d, p));
    return t;
  }();
  return *table[(dim - 1) * (kMaxDegree + 1) + degree];
}

}  // namespace parest
