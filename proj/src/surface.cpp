#include "pointe/surface.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace pointe {

Matrix local_covariance(const Matrix& neighbor_points) {
  const int k = neighbor_points.rows;
  if (neighbor_points.cols != 3)
    throw Error(ErrorCode::ShapeMismatch,
                "neighborhood must be kx3, got " + neighbor_points.shape_str());
  if (k < 3) throw Error(ErrorCode::TooFewNeighbors, "k = " + std::to_string(k));

  double mean[3] = {0, 0, 0};
  for (int j = 0; j < k; ++j) {
    const double* p = neighbor_points.row_ptr(j);
    for (int c = 0; c < 3; ++c) mean[c] += p[c];
  }
  for (double& m : mean) m /= k;

  Matrix cov(3, 3);
  for (int j = 0; j < k; ++j) {
    const double* p = neighbor_points.row_ptr(j);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) cov.at(a, b) += p[a] * p[b];
  }
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) cov.at(a, b) = cov.at(a, b) / k - mean[a] * mean[b];
  return cov;
}

EigenDecomposition sym_eigen_3x3(const Matrix& m) {
  if (m.rows != 3 || m.cols != 3)
    throw Error(ErrorCode::ShapeMismatch, "expected 3x3, got " + m.shape_str());
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b)
      if (std::fabs(m.at(a, b) - m.at(b, a)) > 1e-9)
        throw Error(ErrorCode::NotSymmetric,
                    "entry (" + std::to_string(a) + "," + std::to_string(b) + ")");

  double a[3][3];
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a[r][c] = 0.5 * (m.at(r, c) + m.at(c, r));
  double v[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};

  auto off_norm = [&]() {
    const double s = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    return std::sqrt(2.0 * s);
  };

  for (int sweep = 0; sweep < 50 && off_norm() >= 1e-12; ++sweep) {
    static const int pairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    for (const auto& pq : pairs) {
      const int p = pq[0], q = pq[1];
      if (a[p][q] == 0.0) continue;
      // classic Jacobi rotation annihilating a[p][q]
      const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
      const double t = (theta >= 0 ? 1.0 : -1.0) /
                       (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
      const double c = 1.0 / std::sqrt(t * t + 1.0);
      const double s = t * c;

      for (int i = 0; i < 3; ++i) {
        const double aip = a[i][p], aiq = a[i][q];
        a[i][p] = c * aip - s * aiq;
        a[i][q] = s * aip + c * aiq;
      }
      for (int i = 0; i < 3; ++i) {
        const double api = a[p][i], aqi = a[q][i];
        a[p][i] = c * api - s * aqi;
        a[q][i] = s * api + c * aqi;
      }
      for (int i = 0; i < 3; ++i) {
        const double vip = v[i][p], viq = v[i][q];
        v[i][p] = c * vip - s * viq;
        v[i][q] = s * vip + c * viq;
      }
    }
  }

  // order eigenpairs descending, clamp tiny negatives from roundoff
  int order[3] = {0, 1, 2};
  std::stable_sort(order, order + 3, [&](int x, int y) { return a[x][x] > a[y][y]; });

  EigenDecomposition out;
  out.vectors = Matrix(3, 3);
  for (int k = 0; k < 3; ++k) {
    out.values[k] = std::max(a[order[k]][order[k]], 0.0);
    for (int r = 0; r < 3; ++r) out.vectors.at(r, k) = v[r][order[k]];
  }

  // Gram-Schmidt in column order keeps degenerate bases deterministic
  for (int k = 0; k < 3; ++k) {
    double col[3] = {out.vectors.at(0, k), out.vectors.at(1, k), out.vectors.at(2, k)};
    for (int jprev = 0; jprev < k; ++jprev) {
      double dot = 0;
      for (int r = 0; r < 3; ++r) dot += col[r] * out.vectors.at(r, jprev);
      for (int r = 0; r < 3; ++r) col[r] -= dot * out.vectors.at(r, jprev);
    }
    double norm = std::sqrt(col[0] * col[0] + col[1] * col[1] + col[2] * col[2]);
    if (norm < 1e-12) {
      // fully degenerate column; replace with the standard basis vector
      // least represented so far
      for (int axis = 0; axis < 3; ++axis) {
        double cand[3] = {0, 0, 0};
        cand[axis] = 1.0;
        for (int jprev = 0; jprev < k; ++jprev) {
          double dot = 0;
          for (int r = 0; r < 3; ++r) dot += cand[r] * out.vectors.at(r, jprev);
          for (int r = 0; r < 3; ++r) cand[r] -= dot * out.vectors.at(r, jprev);
        }
        norm = std::sqrt(cand[0] * cand[0] + cand[1] * cand[1] + cand[2] * cand[2]);
        if (norm >= 1e-6) {
          for (int r = 0; r < 3; ++r) col[r] = cand[r];
          break;
        }
      }
    }
    for (int r = 0; r < 3; ++r) out.vectors.at(r, k) = col[r] / norm;
  }

#ifndef NDEBUG
  // eigen residual invariant: M v = lambda v for every pair
  for (int k = 0; k < 3; ++k) {
    for (int r = 0; r < 3; ++r) {
      double mv = 0;
      for (int c = 0; c < 3; ++c) mv += m.at(r, c) * out.vectors.at(c, k);
      assert(std::fabs(mv - out.values[k] * out.vectors.at(r, k)) <= 1e-8);
    }
  }
#endif
  return out;
}

std::array<double, 3> pseudo_normal(const EigenDecomposition& eig) {
  std::array<double, 3> n = {eig.vectors.at(0, 2), eig.vectors.at(1, 2), eig.vectors.at(2, 2)};
  double max_mag = std::max({std::fabs(n[0]), std::fabs(n[1]), std::fabs(n[2])});
  // among components within 1e-12 of the max magnitude, prefer z, then y,
  // then x as the one forced positive
  int pick = 0;
  for (int axis : {2, 1, 0}) {
    if (std::fabs(n[axis]) >= max_mag - 1e-12) {
      pick = axis;
      break;
    }
  }
  if (n[pick] < 0) {
    for (double& c : n) c = -c;
  }
  return n;
}

std::array<double, 3> pseudo_curvature(const std::array<double, 3>& eigenvalues) {
  const double sum = eigenvalues[0] + eigenvalues[1] + eigenvalues[2];
  if (sum < 1e-12) return {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  return {eigenvalues[0] / sum, eigenvalues[1] / sum, eigenvalues[2] / sum};
}

SurfaceDescriptor surface_descriptor(const Matrix& neighbor_points) {
  const Matrix cov = local_covariance(neighbor_points);
  const EigenDecomposition eig = sym_eigen_3x3(cov);
  SurfaceDescriptor d;
  d.eigenvalues = eig.values;
  d.normal = pseudo_normal(eig);
  d.curvature = pseudo_curvature(eig.values);
  return d;
}

}  // namespace pointe
