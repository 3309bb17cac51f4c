#pragma once

#include <array>

#include "pointe/matrix.hpp"

namespace pointe {

// Eigenpairs of a symmetric 3x3 matrix, eigenvalues descending and clamped
// to >= 0, eigenvectors as orthonormal columns in matching order.
struct EigenDecomposition {
  std::array<double, 3> values{};
  Matrix vectors;  // 3x3, column i pairs with values[i]
};

// Local surface summary of one neighborhood: pseudo-normal (unit,
// sign-canonicalized), pseudo-curvature (eigenvalues normalized to sum 1,
// descending) and the raw eigenvalues.
struct SurfaceDescriptor {
  std::array<double, 3> normal{};
  std::array<double, 3> curvature{};
  std::array<double, 3> eigenvalues{};
};

// Covariance of a k x 3 neighborhood: (1/k) sum p_j p_j^T - mean mean^T.
// Requires k >= 3.
Matrix local_covariance(const Matrix& neighbor_points);

// Cyclic Jacobi eigendecomposition. Sweeps until the off-diagonal
// Frobenius norm drops below 1e-12 (at most 50 sweeps). Input must be
// symmetric within 1e-9.
EigenDecomposition sym_eigen_3x3(const Matrix& m);

// Eigenvector of the smallest eigenvalue, flipped so its largest-magnitude
// component is positive; magnitude ties prefer z, then y, then x.
std::array<double, 3> pseudo_normal(const EigenDecomposition& eig);

// Eigenvalues normalized to sum 1; uniform (1/3,1/3,1/3) when the sum is
// below 1e-12.
std::array<double, 3> pseudo_curvature(const std::array<double, 3>& eigenvalues);

// covariance -> eigen -> (normal, curvature) in one call. The descriptor
// is a constant for differentiation: no gradient flows into coordinates.
SurfaceDescriptor surface_descriptor(const Matrix& neighbor_points);

}  // namespace pointe
