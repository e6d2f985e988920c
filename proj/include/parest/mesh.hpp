#pragma once

#include <array>
#include <memory>
#include <optional>
#include <vector>

#include "parest/common.hpp"

namespace parest {

/// Affine map from the reference simplex: x = origin + jacobian * xi.
/// In 1D the jacobian is diag(h, 1) so that 2D formulas apply unchanged.
struct CellGeometry {
  Point origin;
  Eigen::Matrix2d jacobian;
  Eigen::Matrix2d inverse_transpose;
  double det = 0.0;      // |det J|
  double measure = 0.0;  // |K|

  Point map(const Point& xi) const { return origin + jacobian * xi; }
  Point to_reference(const Point& x) const { return inverse_transpose.transpose() * (x - origin); }
};

/// Axis-aligned box that a structured mesh was generated on; enables uniform refinement.
struct StructuredLayout {
  int nx = 1;
  int ny = 1;
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
};

class SimplicialMesh {
 public:
  SimplicialMesh(int dim, std::vector<Point> vertices, std::vector<std::array<int, 3>> cells,
                 std::optional<StructuredLayout> layout = std::nullopt);

  int dim() const { return dim_; }
  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_cells() const { return static_cast<int>(cells_.size()); }
  int vertices_per_cell() const { return dim_ + 1; }

  const Point& vertex(int v) const { return vertices_[v]; }
  const std::array<int, 3>& cell(int k) const { return cells_[k]; }
  bool is_boundary_vertex(int v) const { return boundary_vertex_[v]; }

  double diameter(int k) const { return diameter_[k]; }
  /// Diameter of the largest inscribed ball.
  double inscribed_diameter(int k) const { return inscribed_[k]; }
  double max_diameter() const;
  /// Shape regularity max_K h_K / rho_K.
  double shape_regularity() const;
  double measure() const;

  const CellGeometry& geometry(int k) const { return geometry_[k]; }

  /// Faces are vertices in 1D and edges in 2D. Local face i of a cell is opposite local vertex i.
  int num_faces() const { return static_cast<int>(face_vertices_.size()); }
  /// Face vertices in ascending global order; second entry is -1 in 1D.
  const std::array<int, 2>& face_vertices(int f) const { return face_vertices_[f]; }
  /// Cells adjacent to face f; second entry is -1 on the boundary.
  const std::array<int, 2>& face_cells(int f) const { return face_cells_[f]; }
  bool is_boundary_face(int f) const { return face_cells_[f][1] < 0; }
  int cell_face(int k, int i) const { return cell_faces_[k][i]; }
  /// Unit normal of face f with a globally fixed orientation (+x in 1D).
  Point face_normal(int f) const;
  double face_measure(int f) const;

  const std::optional<StructuredLayout>& layout() const { return layout_; }

 private:
  int dim_;
  std::vector<Point> vertices_;
  std::vector<std::array<int, 3>> cells_;
  std::vector<bool> boundary_vertex_;
  std::vector<double> diameter_;
  std::vector<double> inscribed_;
  std::vector<CellGeometry> geometry_;
  std::vector<std::array<int, 2>> face_vertices_;
  std::vector<std::array<int, 2>> face_cells_;
  std::vector<std::array<int, 3>> cell_faces_;
  std::optional<StructuredLayout> layout_;
};

using MeshPtr = std::shared_ptr<const SimplicialMesh>;

MeshPtr build_interval_mesh(int n_cells, std::array<double, 2> endpoints);
MeshPtr build_structured_triangle_mesh(int nx, int ny, std::array<double, 4> rectangle);
/// Uniform refinement of a structured mesh by an integer factor (nested by construction).
MeshPtr refine_uniform(const SimplicialMesh& mesh, int factor);

struct VertexPatch {
  int vertex = -1;
  std::vector<int> cells;
  bool is_interior = false;
  double diameter = 0.0;
};

std::vector<VertexPatch> vertex_patches(const SimplicialMesh& mesh);

/// Barycentric coordinates of a point relative to a cell (dim+1 entries, rest zero).
std::array<double, 3> barycentric(const SimplicialMesh& mesh, int cell, const Point& x);

/// Bucketed point location.
class CellLocator {
 public:
  explicit CellLocator(MeshPtr mesh);
  /// Some cell containing x within tolerance, or -1.
  int locate(const Point& x, double tol = 1e-12) const;
  const SimplicialMesh& mesh() const { return *mesh_; }

 private:
  MeshPtr mesh_;
  Point lo_, hi_;
  int bx_ = 1, by_ = 1;
  std::vector<std::vector<int>> buckets_;
};

/// For each fine cell, the coarse cell containing it; throws InvalidArgument if not nested.
std::vector<int> parent_cells(MeshPtr coarse, const SimplicialMesh& fine);

}  // namespace parest
