#include "parest/scalar_space.hpp"

#include <algorithm>
#include <map>

#include "parest/errors.hpp"

namespace parest {

ScalarSpace::ScalarSpace(MeshPtr mesh, int degree)
    : mesh_(std::move(mesh)), degree_(degree), basis_(&lagrange_basis(mesh_->dim(), degree)) {
  if (degree < 1) throw InvalidArgument("ScalarSpace: degree must be >= 1");
  const auto& m = *mesh_;
  const int nloc = basis_->size();
  const int nv = m.vertices_per_cell();
  cell_dofs_.resize(static_cast<size_t>(m.num_cells()) * nloc);
  // A node is identified by its (global vertex, barycentric weight) pairs over nonzero weights.
  std::map<std::vector<std::pair<int, int>>, int> index;
  std::vector<bool> on_boundary;
  for (int k = 0; k < m.num_cells(); ++k) {
    for (int i = 0; i < nloc; ++i) {
      const auto& lat = basis_->lattice(i);
      std::vector<std::pair<int, int>> key;
      for (int j = 0; j < nv; ++j)
        if (lat[j] > 0) key.emplace_back(m.cell(k)[j], lat[j]);
      std::sort(key.begin(), key.end());
      auto [it, inserted] = index.try_emplace(key, static_cast<int>(points_.size()));
      if (inserted) {
        points_.push_back(m.geometry(k).map(basis_->node(i)));
        // The node lies on the boundary iff its support vertices span a boundary sub-simplex.
        bool boundary;
        if (key.size() == 1) {
          boundary = m.is_boundary_vertex(key[0].first);
        } else if (key.size() == 2 && m.dim() == 2) {
          boundary = false;
          for (int f = 0; f < 3; ++f) {
            const int face = m.cell_face(k, f);
            const auto& fv = m.face_vertices(face);
            if (m.is_boundary_face(face) && fv[0] == std::min(key[0].first, key[1].first) &&
                fv[1] == std::max(key[0].first, key[1].first))
              boundary = true;
          }
        } else {
          boundary = false;
        }
        on_boundary.push_back(boundary);
      }
      cell_dofs_[static_cast<size_t>(k) * nloc + i] = it->second;
    }
  }
  free_index_.assign(points_.size(), -1);
  for (int i = 0; i < num_dofs(); ++i)
    if (!on_boundary[i]) {
      free_index_[i] = static_cast<int>(free_dofs_.size());
      free_dofs_.push_back(i);
    }
}

Vector ScalarSpace::expand(const Vector& free) const {
  Vector all = Vector::Zero(num_dofs());
  for (int i = 0; i < dimension(); ++i) all[free_dofs_[i]] = free[i];
  return all;
}

Vector ScalarSpace::restrict_to_free(const Vector& all) const {
  Vector free(dimension());
  for (int i = 0; i < dimension(); ++i) free[i] = all[free_dofs_[i]];
  return free;
}

Vector ScalarSpace::local_coefficients(const Vector& free, int k) const {
  const auto dofs = cell_dofs(k);
  Vector local(local_size());
  for (int i = 0; i < local_size(); ++i) {
    const int f = free_index_[dofs[i]];
    local[i] = f < 0 ? 0.0 : free[f];
  }
  return local;
}

double ScalarSpace::evaluate(const Vector& free, int k, const Point& xi) const {
  return local_coefficients(free, k).dot(basis_->values(xi));
}

Point ScalarSpace::gradient(const Vector& free, int k, const Point& xi) const {
  const Vector ref = basis_->gradients(xi) * local_coefficients(free, k);
  return mesh_->geometry(k).inverse_transpose * Point(ref[0], ref[1]);
}

CellField::CellField(MeshPtr mesh, int degree)
    : mesh_(std::move(mesh)), degree_(degree),
      coeffs_(Matrix::Zero(lagrange_basis(mesh_->dim(), degree).size(), mesh_->num_cells())) {}

double CellField::value(int k, const Point& xi) const {
  return coeffs_.col(k).dot(lagrange_basis(mesh_->dim(), degree_).values(xi));
}

double CellField::value_at(int k, const Point& x) const {
  return value(k, mesh_->geometry(k).to_reference(x));
}

const Matrix& CellField::reference_mass_inverse(int dim, int degree) {
  static const auto table = [] {
    std::vector<Matrix> t;
    for (int d = 1; d <= 2; ++d)
      for (int p = 0; p <= 8; ++p) {
        const auto& basis = lagrange_basis(d, p);
        const auto& rule = simplex_rule(d, 2 * p);
        Matrix m = Matrix::Zero(basis.size(), basis.size());
        for (int q = 0; q < rule.size(); ++q) {
          const Vector phi = basis.values(rule.points[q]);
          m += rule.weights[q] * phi * phi.transpose();
        }
        // Physical mass is |det J| times this; project() multiplies the rhs by the same factor.
        t.push_back(m.inverse());
      }
    return t;
  }();
  if (degree < 0 || degree > 8) throw InvalidArgument("CellField: unsupported degree");
  return table[(dim - 1) * 9 + degree];
}

CellField CellField::project_field(MeshPtr mesh, int degree, const CellField& source, const std::vector<int>& parent) {
  const auto& coarse = *source.mesh_ptr();
  CellField field(mesh, degree);
  const auto& rule = cached_simplex_rule(mesh->dim(), degree + source.degree());
  const auto& basis = lagrange_basis(mesh->dim(), degree);
  const Matrix& minv = reference_mass_inverse(mesh->dim(), degree);
  for (int k = 0; k < mesh->num_cells(); ++k) {
    const auto& g = mesh->geometry(k);
    const int K = parent.empty() ? k : parent[k];
    Vector rhs = Vector::Zero(basis.size());
    for (int q = 0; q < rule.size(); ++q) {
      const Point x = g.map(rule.points[q]);
      rhs += rule.weights[q] * source.value(K, coarse.geometry(K).to_reference(x)) * basis.values(rule.points[q]);
    }
    field.coeffs_.col(k) = minv * rhs;
  }
  return field;
}

}  // namespace parest
