#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace parest {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
/// Spatial points always carry two components; 1D geometry leaves y = 0.
using Point = Eigen::Vector2d;

}  // namespace parest
