#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "pointe/rng.hpp"
#include "pointe/surface.hpp"

using namespace pointe;

namespace {

Matrix random_neighborhood(Rng& rng, int k) {
  Matrix m(k, 3);
  for (double& v : m.data) v = rng.uniform(-1.0, 1.0);
  return m;
}

// two-pass covariance: subtract the mean first, then average outer products
Matrix covariance_oracle(const Matrix& pts) {
  const int k = pts.rows;
  double mean[3] = {0, 0, 0};
  for (int j = 0; j < k; ++j)
    for (int c = 0; c < 3; ++c) mean[c] += pts.at(j, c);
  for (double& m : mean) m /= k;
  Matrix cov(3, 3);
  for (int j = 0; j < k; ++j)
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        cov.at(a, b) += (pts.at(j, a) - mean[a]) * (pts.at(j, b) - mean[b]);
  for (double& v : cov.data) v /= k;
  return cov;
}

// roots of det(M - x I) = 0 for symmetric 3x3, via the trigonometric form
std::array<double, 3> characteristic_roots(const Matrix& m) {
  const double a = m.at(0, 0), b = m.at(1, 1), c = m.at(2, 2);
  const double d = m.at(0, 1), e = m.at(0, 2), f = m.at(1, 2);
  const double p1 = d * d + e * e + f * f;
  std::array<double, 3> roots;
  if (p1 < 1e-30) {
    roots = {a, b, c};
  } else {
    const double q = (a + b + c) / 3.0;
    const double p2 =
        (a - q) * (a - q) + (b - q) * (b - q) + (c - q) * (c - q) + 2.0 * p1;
    const double p = std::sqrt(p2 / 6.0);
    // B = (M - qI)/p, r = det(B)/2 in [-1, 1]
    const double b00 = (a - q) / p, b11 = (b - q) / p, b22 = (c - q) / p;
    const double b01 = d / p, b02 = e / p, b12 = f / p;
    double r = b00 * (b11 * b22 - b12 * b12) - b01 * (b01 * b22 - b12 * b02) +
               b02 * (b01 * b12 - b11 * b02);
    r /= 2.0;
    r = std::clamp(r, -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    const double two_pi_3 = 2.0943951023931954923;
    roots[0] = q + 2.0 * p * std::cos(phi);
    roots[2] = q + 2.0 * p * std::cos(phi + 2.0 * two_pi_3);
    roots[1] = 3.0 * q - roots[0] - roots[2];
  }
  std::sort(roots.begin(), roots.end(), std::greater<double>());
  return roots;
}

Matrix random_rotation(Rng& rng) {
  // Rodrigues rotation about a random axis
  double ax = rng.normal(), ay = rng.normal(), az = rng.normal();
  const double n = std::sqrt(ax * ax + ay * ay + az * az);
  ax /= n;
  ay /= n;
  az /= n;
  const double angle = rng.uniform(0.0, 6.283185307179586);
  const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  return Matrix::from_nested({{t * ax * ax + c, t * ax * ay - s * az, t * ax * az + s * ay},
                              {t * ax * ay + s * az, t * ay * ay + c, t * ay * az - s * ax},
                              {t * ax * az - s * ay, t * ay * az + s * ax, t * az * az + c}});
}

}  // namespace

TEST_CASE("covariance of identical points is zero") {
  Matrix pts(5, 3);
  for (int j = 0; j < 5; ++j) {
    pts.at(j, 0) = 1.5;
    pts.at(j, 1) = -2.0;
    pts.at(j, 2) = 0.25;
  }
  const Matrix cov = local_covariance(pts);
  for (double v : cov.data) CHECK(std::fabs(v) < 1e-12);
}

TEST_CASE("covariance of square corners is diag(1,1,0)") {
  const Matrix pts =
      Matrix::from_nested({{1, 1, 0}, {1, -1, 0}, {-1, 1, 0}, {-1, -1, 0}});
  const Matrix cov = local_covariance(pts);
  CHECK(cov.at(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(cov.at(1, 1) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(cov.at(2, 2) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(std::fabs(cov.at(0, 1)) < 1e-14);
}

TEST_CASE("covariance matches the two-pass oracle") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix pts = random_neighborhood(rng, 20);
    CHECK(max_abs_diff(local_covariance(pts), covariance_oracle(pts)) < 1e-12);
  }
}

TEST_CASE("covariance requires at least three points") {
  Matrix pts(2, 3);
  CHECK_THROWS_AS(local_covariance(pts), Error);
}

TEST_CASE("eigen of a diagonal matrix") {
  const auto eig = sym_eigen_3x3(Matrix::from_nested({{3, 0, 0}, {0, 2, 0}, {0, 0, 1}}));
  CHECK(eig.values[0] == doctest::Approx(3.0));
  CHECK(eig.values[1] == doctest::Approx(2.0));
  CHECK(eig.values[2] == doctest::Approx(1.0));
  for (int k = 0; k < 3; ++k)
    for (int r = 0; r < 3; ++r)
      CHECK(std::fabs(std::fabs(eig.vectors.at(r, k)) - (r == k ? 1.0 : 0.0)) < 1e-12);
}

TEST_CASE("eigen of the zero matrix is the identity basis") {
  const auto eig = sym_eigen_3x3(Matrix::zeros(3, 3));
  CHECK(eig.values == std::array<double, 3>{0, 0, 0});
  CHECK(max_abs_diff(eig.vectors, Matrix::identity(3)) == 0.0);
}

TEST_CASE("eigen rejects asymmetric input") {
  CHECK_THROWS_AS(sym_eigen_3x3(Matrix::from_nested({{1, 2, 0}, {0, 1, 0}, {0, 0, 1}})), Error);
}

TEST_CASE("eigen satisfies residual, orthonormality and root equations") {
  Rng rng(22);
  for (int trial = 0; trial < 500; ++trial) {
    Matrix g = random_neighborhood(rng, 3);
    const Matrix m = matmul_tn(g, g);  // PSD
    const auto eig = sym_eigen_3x3(m);

    for (int k = 0; k < 3; ++k) {
      for (int r = 0; r < 3; ++r) {
        double mv = 0;
        for (int c = 0; c < 3; ++c) mv += m.at(r, c) * eig.vectors.at(c, k);
        CHECK(std::fabs(mv - eig.values[k] * eig.vectors.at(r, k)) <= 1e-8);
      }
    }
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        double dot = 0;
        for (int r = 0; r < 3; ++r) dot += eig.vectors.at(r, i) * eig.vectors.at(r, j);
        CHECK(std::fabs(dot - (i == j ? 1.0 : 0.0)) <= 1e-8);
      }
    }
    const auto roots = characteristic_roots(m);
    for (int k = 0; k < 3; ++k) CHECK(std::fabs(roots[k] - eig.values[k]) <= 1e-7);
    CHECK(eig.values[0] >= eig.values[1]);
    CHECK(eig.values[1] >= eig.values[2]);
    CHECK(eig.values[2] >= 0.0);
  }
}

TEST_CASE("coplanar neighborhoods give the canonical plane normal") {
  Rng rng(23);
  Matrix z0(12, 3);
  for (int j = 0; j < 12; ++j) {
    z0.at(j, 0) = rng.uniform(-1, 1);
    z0.at(j, 1) = rng.uniform(-1, 1);
    z0.at(j, 2) = 0.0;
  }
  const auto d = surface_descriptor(z0);
  CHECK(d.normal[0] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(d.normal[1] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(d.normal[2] == doctest::Approx(1.0).epsilon(1e-9));

  Matrix x0(12, 3);
  for (int j = 0; j < 12; ++j) {
    x0.at(j, 0) = 0.0;
    x0.at(j, 1) = rng.uniform(-1, 1);
    x0.at(j, 2) = rng.uniform(-1, 1);
  }
  const auto dx = surface_descriptor(x0);
  CHECK(dx.normal[0] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("pseudo-normal of a noisy sloped plane matches a regression fit") {
  // plane z = x, normal along (-1, 0, 1)/sqrt(2)
  Rng rng(24);
  Matrix pts(40, 3);
  for (int j = 0; j < 40; ++j) {
    const double x = rng.uniform(-1, 1), y = rng.uniform(-1, 1);
    pts.at(j, 0) = x;
    pts.at(j, 1) = y;
    pts.at(j, 2) = x + 0.02 * rng.normal();
  }
  const auto d = surface_descriptor(pts);

  // least-squares fit z = ax + by + c
  double sxx = 0, sxy = 0, syy = 0, sxz = 0, syz = 0, sx = 0, sy = 0, sz = 0;
  for (int j = 0; j < 40; ++j) {
    const double x = pts.at(j, 0), y = pts.at(j, 1), z = pts.at(j, 2);
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
    sxz += x * z;
    syz += y * z;
    sx += x;
    sy += y;
    sz += z;
  }
  const int n = 40;
  // solve the 3x3 normal equations by elimination
  double A[3][4] = {{sxx, sxy, sx, sxz}, {sxy, syy, sy, syz}, {sx, sy, double(n), sz}};
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::fabs(A[r][col]) > std::fabs(A[piv][col])) piv = r;
    std::swap(A[piv], A[col]);
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double f = A[r][col] / A[col][col];
      for (int c = col; c < 4; ++c) A[r][c] -= f * A[col][c];
    }
  }
  const double a = A[0][3] / A[0][0], b = A[1][3] / A[1][1];
  double fit[3] = {-a, -b, 1.0};
  const double fn = std::sqrt(fit[0] * fit[0] + fit[1] * fit[1] + fit[2] * fit[2]);
  for (double& v : fit) v /= fn;

  const double dot = std::fabs(fit[0] * d.normal[0] + fit[1] * d.normal[1] +
                               fit[2] * d.normal[2]);
  const double angle_deg = std::acos(std::min(dot, 1.0)) * 180.0 / 3.14159265358979;
  CHECK(angle_deg < 2.0);
}

TEST_CASE("pseudo-curvature normalizes eigenvalues") {
  CHECK(pseudo_curvature({2, 1, 1}) == std::array<double, 3>{0.5, 0.25, 0.25});
  CHECK(pseudo_curvature({0, 0, 0}) ==
        std::array<double, 3>{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});

  Rng rng(25);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix pts = random_neighborhood(rng, 10);
    const auto eig = sym_eigen_3x3(local_covariance(pts));
    const auto c = pseudo_curvature(eig.values);
    const double sum = eig.values[0] + eig.values[1] + eig.values[2];
    CHECK(c[0] + c[1] + c[2] == doctest::Approx(1.0).epsilon(1e-12));
    for (int i = 0; i < 3; ++i)
      CHECK(c[i] == doctest::Approx(eig.values[i] / sum).epsilon(1e-12));
  }
}

TEST_CASE("curvature is rotation and translation invariant, normal equivariant") {
  Rng rng(26);
  for (int trial = 0; trial < 40; ++trial) {
    const Matrix pts = random_neighborhood(rng, 15);
    const auto base = surface_descriptor(pts);

    const Matrix rot = random_rotation(rng);
    Matrix moved(15, 3);
    const double tx = rng.uniform(-4, 4), ty = rng.uniform(-4, 4), tz = rng.uniform(-4, 4);
    for (int j = 0; j < 15; ++j) {
      for (int r = 0; r < 3; ++r) {
        double v = 0;
        for (int c = 0; c < 3; ++c) v += rot.at(r, c) * pts.at(j, c);
        moved.at(j, r) = v + (r == 0 ? tx : r == 1 ? ty : tz);
      }
    }
    const auto rotated = surface_descriptor(moved);
    for (int i = 0; i < 3; ++i)
      CHECK(rotated.curvature[i] == doctest::Approx(base.curvature[i]).epsilon(1e-8));

    // normal transforms with the rotation, up to the documented sign rule
    double rn[3] = {0, 0, 0};
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) rn[r] += rot.at(r, c) * base.normal[c];
    double diff_plus = 0, diff_minus = 0;
    for (int r = 0; r < 3; ++r) {
      diff_plus = std::max(diff_plus, std::fabs(rn[r] - rotated.normal[r]));
      diff_minus = std::max(diff_minus, std::fabs(rn[r] + rotated.normal[r]));
    }
    CHECK(std::min(diff_plus, diff_minus) < 1e-8);
  }

  // pure translation leaves both descriptors untouched
  const Matrix pts = random_neighborhood(rng, 12);
  Matrix shifted = pts;
  for (int j = 0; j < 12; ++j) {
    shifted.at(j, 0) += 3.5;
    shifted.at(j, 1) -= 1.25;
    shifted.at(j, 2) += 0.75;
  }
  const auto a = surface_descriptor(pts);
  const auto b = surface_descriptor(shifted);
  for (int i = 0; i < 3; ++i) {
    CHECK(a.normal[i] == doctest::Approx(b.normal[i]).epsilon(1e-9));
    CHECK(a.curvature[i] == doctest::Approx(b.curvature[i]).epsilon(1e-9));
  }
}
