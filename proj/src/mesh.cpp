#include "parest/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "parest/errors.hpp"

namespace parest {

SimplicialMesh::SimplicialMesh(int dim, std::vector<Point> vertices, std::vector<std::array<int, 3>> cells,
                               std::optional<StructuredLayout> layout)
    : dim_(dim), vertices_(std::move(vertices)), cells_(std::move(cells)), layout_(layout) {
  if (dim_ != 1 && dim_ != 2) throw InvalidArgument("SimplicialMesh: dim must be 1 or 2");
  if (cells_.empty()) throw InvalidArgument("SimplicialMesh: no cells");
  const int nv = dim_ + 1;
  const int nc = num_cells();
  geometry_.resize(nc);
  diameter_.resize(nc);
  inscribed_.resize(nc);
  for (int k = 0; k < nc; ++k) {
    const auto& c = cells_[k];
    for (int i = 0; i < nv; ++i)
      if (c[i] < 0 || c[i] >= num_vertices()) throw InvalidArgument("SimplicialMesh: bad vertex index");
    CellGeometry& g = geometry_[k];
    g.origin = vertices_[c[0]];
    if (dim_ == 1) {
      const double h = vertices_[c[1]][0] - vertices_[c[0]][0];
      g.jacobian << h, 0.0, 0.0, 1.0;
    } else {
      g.jacobian.col(0) = vertices_[c[1]] - vertices_[c[0]];
      g.jacobian.col(1) = vertices_[c[2]] - vertices_[c[0]];
    }
    const double det = g.jacobian.determinant();
    if (!(std::abs(det) > 0.0)) throw InvalidArgument("SimplicialMesh: degenerate cell");
    g.det = std::abs(det);
    g.inverse_transpose = g.jacobian.inverse().transpose();
    g.measure = dim_ == 1 ? g.det : 0.5 * g.det;
    if (dim_ == 1) {
      diameter_[k] = g.det;
      inscribed_[k] = g.det;
    } else {
      const double a = (vertices_[c[1]] - vertices_[c[0]]).norm();
      const double b = (vertices_[c[2]] - vertices_[c[1]]).norm();
      const double e = (vertices_[c[0]] - vertices_[c[2]]).norm();
      diameter_[k] = std::max({a, b, e});
      inscribed_[k] = 4.0 * g.measure / (a + b + e);
    }
  }

  // Faces: vertices in 1D, edges in 2D, keyed by sorted vertex pair.
  cell_faces_.assign(nc, {-1, -1, -1});
  if (dim_ == 1) {
    face_vertices_.resize(num_vertices());
    face_cells_.assign(num_vertices(), {-1, -1});
    for (int v = 0; v < num_vertices(); ++v) face_vertices_[v] = {v, -1};
    for (int k = 0; k < nc; ++k)
      for (int i = 0; i < 2; ++i) {
        const int f = cells_[k][1 - i];
        cell_faces_[k][i] = f;
        auto& fc = face_cells_[f];
        (fc[0] < 0 ? fc[0] : fc[1]) = k;
      }
  } else {
    std::map<std::pair<int, int>, int> index;
    for (int k = 0; k < nc; ++k)
      for (int i = 0; i < 3; ++i) {
        int a = cells_[k][(i + 1) % 3], b = cells_[k][(i + 2) % 3];
        if (a > b) std::swap(a, b);
        auto [it, inserted] = index.try_emplace({a, b}, static_cast<int>(face_vertices_.size()));
        if (inserted) {
          face_vertices_.push_back({a, b});
          face_cells_.push_back({k, -1});
        } else {
          auto& fc = face_cells_[it->second];
          if (fc[1] >= 0) throw InvalidArgument("SimplicialMesh: non-conforming edge");
          fc[1] = k;
        }
        cell_faces_[k][i] = it->second;
      }
  }
  boundary_vertex_.assign(num_vertices(), false);
  for (int f = 0; f < num_faces(); ++f)
    if (is_boundary_face(f))
      for (int v : face_vertices_[f])
        if (v >= 0) boundary_vertex_[v] = true;
}

double SimplicialMesh::max_diameter() const { return *std::max_element(diameter_.begin(), diameter_.end()); }

double SimplicialMesh::shape_regularity() const {
  double theta = 0.0;
  for (int k = 0; k < num_cells(); ++k) theta = std::max(theta, diameter_[k] / inscribed_[k]);
  return theta;
}

double SimplicialMesh::measure() const {
  double m = 0.0;
  for (const auto& g : geometry_) m += g.measure;
  return m;
}

Point SimplicialMesh::face_normal(int f) const {
  if (dim_ == 1) return Point(1.0, 0.0);
  const Point t = vertices_[face_vertices_[f][1]] - vertices_[face_vertices_[f][0]];
  return Point(t[1], -t[0]) / t.norm();
}

double SimplicialMesh::face_measure(int f) const {
  if (dim_ == 1) return 1.0;
  return (vertices_[face_vertices_[f][1]] - vertices_[face_vertices_[f][0]]).norm();
}

MeshPtr build_interval_mesh(int n_cells, std::array<double, 2> endpoints) {
  if (n_cells < 1) throw InvalidArgument("build_interval_mesh: n_cells must be positive");
  if (!(endpoints[0] < endpoints[1])) throw InvalidArgument("build_interval_mesh: endpoints must be ordered");
  std::vector<Point> vertices;
  std::vector<std::array<int, 3>> cells;
  const double h = (endpoints[1] - endpoints[0]) / n_cells;
  for (int i = 0; i <= n_cells; ++i)
    vertices.emplace_back(i == n_cells ? endpoints[1] : endpoints[0] + i * h, 0.0);
  for (int i = 0; i < n_cells; ++i) cells.push_back({i, i + 1, -1});
  StructuredLayout layout{n_cells, 1, endpoints[0], endpoints[1], 0.0, 0.0};
  return std::make_shared<SimplicialMesh>(1, std::move(vertices), std::move(cells), layout);
}

MeshPtr build_structured_triangle_mesh(int nx, int ny, std::array<double, 4> r) {
  if (nx < 1 || ny < 1) throw InvalidArgument("build_structured_triangle_mesh: nx, ny must be positive");
  if (!(r[0] < r[1]) || !(r[2] < r[3])) throw InvalidArgument("build_structured_triangle_mesh: degenerate rectangle");
  std::vector<Point> vertices;
  std::vector<std::array<int, 3>> cells;
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      const double x = i == nx ? r[1] : r[0] + (r[1] - r[0]) * i / nx;
      const double y = j == ny ? r[3] : r[2] + (r[3] - r[2]) * j / ny;
      vertices.emplace_back(x, y);
    }
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int v00 = id(i, j), v10 = id(i + 1, j), v01 = id(i, j + 1), v11 = id(i + 1, j + 1);
      cells.push_back({v00, v10, v11});
      cells.push_back({v00, v11, v01});
    }
  StructuredLayout layout{nx, ny, r[0], r[1], r[2], r[3]};
  return std::make_shared<SimplicialMesh>(2, std::move(vertices), std::move(cells), layout);
}

MeshPtr refine_uniform(const SimplicialMesh& mesh, int factor) {
  if (factor < 1) throw InvalidArgument("refine_uniform: factor must be positive");
  if (!mesh.layout()) throw InvalidArgument("refine_uniform: mesh has no structured layout");
  const StructuredLayout& l = *mesh.layout();
  if (mesh.dim() == 1) return build_interval_mesh(l.nx * factor, {l.x0, l.x1});
  return build_structured_triangle_mesh(l.nx * factor, l.ny * factor, {l.x0, l.x1, l.y0, l.y1});
}

std::vector<VertexPatch> vertex_patches(const SimplicialMesh& mesh) {
  std::vector<VertexPatch> patches(mesh.num_vertices());
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    patches[v].vertex = v;
    patches[v].is_interior = !mesh.is_boundary_vertex(v);
  }
  for (int k = 0; k < mesh.num_cells(); ++k)
    for (int i = 0; i < mesh.vertices_per_cell(); ++i) patches[mesh.cell(k)[i]].cells.push_back(k);
  for (auto& patch : patches) {
    std::vector<int> verts;
    for (int k : patch.cells)
      for (int i = 0; i < mesh.vertices_per_cell(); ++i) verts.push_back(mesh.cell(k)[i]);
    double d = 0.0;
    for (int a : verts)
      for (int b : verts) d = std::max(d, (mesh.vertex(a) - mesh.vertex(b)).norm());
    patch.diameter = d;
  }
  return patches;
}

std::array<double, 3> barycentric(const SimplicialMesh& mesh, int cell, const Point& x) {
  const Point xi = mesh.geometry(cell).to_reference(x);
  if (mesh.dim() == 1) return {1.0 - xi[0], xi[0], 0.0};
  return {1.0 - xi[0] - xi[1], xi[0], xi[1]};
}

CellLocator::CellLocator(MeshPtr mesh) : mesh_(std::move(mesh)) {
  const auto& m = *mesh_;
  lo_ = hi_ = m.vertex(0);
  for (int v = 0; v < m.num_vertices(); ++v) {
    lo_ = lo_.cwiseMin(m.vertex(v));
    hi_ = hi_.cwiseMax(m.vertex(v));
  }
  const int n = m.num_cells();
  if (m.dim() == 1) {
    bx_ = std::max(1, n);
    by_ = 1;
  } else {
    bx_ = by_ = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(n))));
  }
  buckets_.assign(static_cast<size_t>(bx_) * by_, {});
  const Point span = (hi_ - lo_).cwiseMax(Point(1e-300, 1e-300));
  for (int k = 0; k < n; ++k) {
    Point clo = m.vertex(m.cell(k)[0]), chi = clo;
    for (int i = 1; i < m.vertices_per_cell(); ++i) {
      clo = clo.cwiseMin(m.vertex(m.cell(k)[i]));
      chi = chi.cwiseMax(m.vertex(m.cell(k)[i]));
    }
    const double eps = 1e-9;
    const int i0 = std::clamp(static_cast<int>(std::floor(((clo[0] - lo_[0]) / span[0] - eps) * bx_)), 0, bx_ - 1);
    const int i1 = std::clamp(static_cast<int>(std::floor(((chi[0] - lo_[0]) / span[0] + eps) * bx_)), 0, bx_ - 1);
    int j0 = 0, j1 = 0;
    if (m.dim() == 2) {
      j0 = std::clamp(static_cast<int>(std::floor(((clo[1] - lo_[1]) / span[1] - eps) * by_)), 0, by_ - 1);
      j1 = std::clamp(static_cast<int>(std::floor(((chi[1] - lo_[1]) / span[1] + eps) * by_)), 0, by_ - 1);
    }
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i) buckets_[static_cast<size_t>(j) * bx_ + i].push_back(k);
  }
}

int CellLocator::locate(const Point& x, double tol) const {
  const auto& m = *mesh_;
  const Point span = (hi_ - lo_).cwiseMax(Point(1e-300, 1e-300));
  const int i = std::clamp(static_cast<int>(std::floor((x[0] - lo_[0]) / span[0] * bx_)), 0, bx_ - 1);
  const int j = m.dim() == 2 ? std::clamp(static_cast<int>(std::floor((x[1] - lo_[1]) / span[1] * by_)), 0, by_ - 1) : 0;
  for (int k : buckets_[static_cast<size_t>(j) * bx_ + i]) {
    const auto b = barycentric(m, k, x);
    bool inside = true;
    for (int q = 0; q <= m.dim(); ++q) inside = inside && b[q] >= -tol;
    if (inside) return k;
  }
  return -1;
}

std::vector<int> parent_cells(MeshPtr coarse, const SimplicialMesh& fine) {
  if (coarse->dim() != fine.dim()) throw InvalidArgument("parent_cells: dimension mismatch");
  const CellLocator locator(coarse);
  std::vector<int> parent(fine.num_cells());
  const int nv = fine.vertices_per_cell();
  for (int k = 0; k < fine.num_cells(); ++k) {
    Point centroid = Point::Zero();
    for (int i = 0; i < nv; ++i) centroid += fine.vertex(fine.cell(k)[i]);
    centroid /= nv;
    const int K = locator.locate(centroid, 1e-12);
    if (K < 0) throw InvalidArgument("parent_cells: fine cell outside coarse mesh");
    for (int i = 0; i < nv; ++i) {
      const auto b = barycentric(*coarse, K, fine.vertex(fine.cell(k)[i]));
      for (int q = 0; q < nv; ++q)
        if (b[q] < -1e-10) throw InvalidArgument("parent_cells: meshes are not nested");
    }
    parent[k] = K;
  }
  return parent;
}

}  // namespace parest
