#include "parest/rtn.hpp"

#include <Eigen/LU>

#include "parest/errors.hpp"
#include "parest/quadrature.hpp"

namespace parest {

namespace {

double ipow(double x, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= x;
  return r;
}

/// Legendre polynomial of degree j on [-1,1].
double legendre(int j, double x) {
  double p0 = 1.0, p1 = x;
  if (j == 0) return p0;
  for (int n = 2; n <= j; ++n) {
    const double p2 = ((2.0 * n - 1.0) * x * p1 - (n - 1.0) * p0) / n;
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

Point cell_center(const SimplicialMesh& m, int k) {
  Point c = Point::Zero();
  for (int i = 0; i < m.vertices_per_cell(); ++i) c += m.vertex(m.cell(k)[i]);
  return c / m.vertices_per_cell();
}

}  // namespace

RTNSpace::RTNSpace(MeshPtr mesh, int order) : mesh_(std::move(mesh)), order_(order) {
  if (order < 0) throw InvalidArgument("RTNSpace: negative order");
  const auto& m = *mesh_;
  const int k = order;
  if (m.dim() == 1) {
    face_dofs_ = 1;
    interior_dofs_ = k;
    local_size_ = k + 2;
    for (int a = 0; a <= k + 1; ++a) exponents_.push_back({a, 0});
  } else {
    face_dofs_ = k + 1;
    interior_dofs_ = k * (k + 1);
    local_size_ = (k + 1) * (k + 3);
    for (int total = 0; total <= k; ++total)
      for (int b = 0; b <= total; ++b) exponents_.push_back({total - b, b});
  }
  const int nfaces_local = m.dim() + 1;
  num_dofs_ = m.num_faces() * face_dofs_ + m.num_cells() * interior_dofs_;
  cell_dofs_.resize(static_cast<size_t>(m.num_cells()) * local_size_);
  dual_.resize(m.num_cells());

  const auto& face_rule = gauss_legendre(k + 2);
  const auto& cell_rule = cached_simplex_rule(m.dim(), 2 * k + 2);
  for (int K = 0; K < m.num_cells(); ++K) {
    int slot = 0;
    for (int f = 0; f < nfaces_local; ++f)
      for (int j = 0; j < face_dofs_; ++j) cell_dofs_[static_cast<size_t>(K) * local_size_ + slot++] = face_dof(m.cell_face(K, f), j);
    for (int j = 0; j < interior_dofs_; ++j)
      cell_dofs_[static_cast<size_t>(K) * local_size_ + slot++] = m.num_faces() * face_dofs_ + K * interior_dofs_ + j;

    // dofs(row) applied to prebasis(col)
    Matrix d = Matrix::Zero(local_size_, local_size_);
    Matrix vals;
    Vector div;
    int row = 0;
    for (int f = 0; f < nfaces_local; ++f) {
      const int face = m.cell_face(K, f);
      const Point normal = m.face_normal(face);
      if (m.dim() == 1) {
        prebasis(K, m.vertex(m.face_vertices(face)[0]), vals, div);
        d.row(row++) = vals.row(0);
        continue;
      }
      for (int j = 0; j < face_dofs_; ++j, ++row)
        for (int q = 0; q < face_rule.size(); ++q) {
          const double t = face_rule.points[q][0];
          prebasis(K, face_point(face, t), vals, div);
          d.row(row) += face_rule.weights[q] * legendre(j, 2.0 * t - 1.0) * (normal.transpose() * vals);
        }
    }
    const auto& g = m.geometry(K);
    const Point c = cell_center(m, K);
    const double h = m.diameter(K);
    const int components = m.dim();
    for (int comp = 0; comp < components; ++comp)
      for (int j = 0; j < (m.dim() == 1 ? k : k * (k + 1) / 2); ++j, ++row)
        for (int q = 0; q < cell_rule.size(); ++q) {
          const Point x = g.map(cell_rule.points[q]);
          prebasis(K, x, vals, div);
          const Point s = (x - c) / h;
          const double mono = ipow(s[0], exponents_[j][0]) * ipow(s[1], exponents_[j][1]);
          // Normalized by |K|: reference weights sum to |K_ref| and det/|K| = d!.
          d.row(row) += cell_rule.weights[q] * g.det / g.measure * mono * vals.row(comp);
        }
    if (row != local_size_) throw AssemblyError("RTNSpace: dof count mismatch");
    Eigen::FullPivLU<Matrix> lu(d);
    if (!lu.isInvertible()) throw AssemblyError("RTNSpace: unisolvence failure");
    dual_[K] = lu.inverse();
  }
}

Point RTNSpace::face_point(int face, double t) const {
  const auto& fv = mesh_->face_vertices(face);
  if (mesh_->dim() == 1) return mesh_->vertex(fv[0]);
  return mesh_->vertex(fv[0]) + t * (mesh_->vertex(fv[1]) - mesh_->vertex(fv[0]));
}

void RTNSpace::prebasis(int K, const Point& x, Matrix& values, Vector& divergence) const {
  const auto& m = *mesh_;
  const Point c = cell_center(m, K);
  const double h = m.diameter(K);
  const Point s = (x - c) / h;
  const int k = order_;
  values.setZero(2, local_size_);
  divergence.setZero(local_size_);
  if (m.dim() == 1) {
    for (int a = 0; a <= k + 1; ++a) {
      values(0, a) = ipow(s[0], a);
      divergence[a] = a > 0 ? a * ipow(s[0], a - 1) / h : 0.0;
    }
    return;
  }
  const int np = static_cast<int>(exponents_.size());
  for (int j = 0; j < np; ++j) {
    const int a = exponents_[j][0], b = exponents_[j][1];
    const double mono = ipow(s[0], a) * ipow(s[1], b);
    values(0, j) = mono;
    values(1, np + j) = mono;
    divergence[j] = a > 0 ? a * ipow(s[0], a - 1) * ipow(s[1], b) / h : 0.0;
    divergence[np + j] = b > 0 ? b * ipow(s[0], a) * ipow(s[1], b - 1) / h : 0.0;
  }
  for (int a = 0; a <= k; ++a) {
    const double mono = ipow(s[0], a) * ipow(s[1], k - a);
    values(0, 2 * np + a) = s[0] * mono;
    values(1, 2 * np + a) = s[1] * mono;
    divergence[2 * np + a] = (k + 2) * mono / h;
  }
}

void RTNSpace::evaluate(int K, const Point& xi, Matrix& values, Vector& divergence) const {
  Matrix pv;
  Vector pd;
  prebasis(K, mesh_->geometry(K).map(xi), pv, pd);
  values = pv * dual_[K];
  divergence = dual_[K].transpose() * pd;
}

Point RTNSpace::value(const Vector& coeffs, int K, const Point& xi) const {
  Matrix v;
  Vector d;
  evaluate(K, xi, v, d);
  Vector local(local_size_);
  const auto dofs = cell_dofs(K);
  for (int i = 0; i < local_size_; ++i) local[i] = coeffs[dofs[i]];
  const Vector r = v * local;
  return Point(r[0], r[1]);
}

double RTNSpace::divergence(const Vector& coeffs, int K, const Point& xi) const {
  Matrix v;
  Vector d;
  evaluate(K, xi, v, d);
  double s = 0.0;
  const auto dofs = cell_dofs(K);
  for (int i = 0; i < local_size_; ++i) s += coeffs[dofs[i]] * d[i];
  return s;
}

}  // namespace parest
