#include "pointe/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace pointe {

namespace {

double sq_dist(const Matrix& pts, int a, int b) {
  const double* pa = pts.row_ptr(a);
  const double* pb = pts.row_ptr(b);
  const double dx = pa[0] - pb[0];
  const double dy = pa[1] - pb[1];
  const double dz = pa[2] - pb[2];
  return dx * dx + dy * dy + dz * dz;
}

// lexicographic (x,y,z) comparison of two point rows
int lex_compare(const Matrix& pts, int a, int b) {
  const double* pa = pts.row_ptr(a);
  const double* pb = pts.row_ptr(b);
  for (int c = 0; c < 3; ++c) {
    if (pa[c] < pb[c]) return -1;
    if (pa[c] > pb[c]) return 1;
  }
  return 0;
}

// true if candidate (key_a, index a) beats the incumbent (key_b, index b):
// larger key wins, ties prefer lexicographically smaller coordinates, then
// lower index
bool beats(const Matrix& pts, double key_a, int a, double key_b, int b) {
  if (key_a != key_b) return key_a > key_b;
  const int cmp = lex_compare(pts, a, b);
  if (cmp != 0) return cmp < 0;
  return a < b;
}

int start_index(const Matrix& points) {
  const int n = points.rows;
  // centroid accumulated in lexicographic order so the value does not
  // depend on input row order
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const int cmp = lex_compare(points, a, b);
    return cmp != 0 ? cmp < 0 : a < b;
  });
  double cx = 0, cy = 0, cz = 0;
  for (int i : order) {
    cx += points.at(i, 0);
    cy += points.at(i, 1);
    cz += points.at(i, 2);
  }
  cx /= n;
  cy /= n;
  cz /= n;

  int best = 0;
  double best_key = -1.0;
  for (int i = 0; i < n; ++i) {
    const double dx = points.at(i, 0) - cx;
    const double dy = points.at(i, 1) - cy;
    const double dz = points.at(i, 2) - cz;
    const double key = dx * dx + dy * dy + dz * dz;
    if (i == 0 || beats(points, key, i, best_key, best)) {
      best = i;
      best_key = key;
    }
  }
  return best;
}

}  // namespace

std::vector<int> farthest_point_sample(const Matrix& points, int m, int start) {
  const int n = points.rows;
  if (m < 1 || m > n)
    throw Error(ErrorCode::BadSampleCount,
                "m = " + std::to_string(m) + " for " + std::to_string(n) + " points");
  if (start < 0 || start >= n)
    throw Error(ErrorCode::IndexOutOfRange, "start index " + std::to_string(start));

  std::vector<int> selected;
  selected.reserve(m);
  selected.push_back(start);

  std::vector<double> min_dist(n);
  for (int i = 0; i < n; ++i) min_dist[i] = sq_dist(points, i, start);

  while (static_cast<int>(selected.size()) < m) {
    int best = -1;
    double best_key = -1.0;
    for (int i = 0; i < n; ++i) {
      if (min_dist[i] == 0.0) continue;  // already selected or coincident
      if (best < 0 || beats(points, min_dist[i], i, best_key, best)) {
        best = i;
        best_key = min_dist[i];
      }
    }
    if (best < 0) {
      // all remaining points coincide with a selected one; fall back to
      // index order over the not-yet-selected
      std::vector<uint8_t> taken(n, 0);
      for (int s : selected) taken[s] = 1;
      for (int i = 0; i < n && static_cast<int>(selected.size()) < m; ++i)
        if (!taken[i]) selected.push_back(i);
      break;
    }
    selected.push_back(best);
    for (int i = 0; i < n; ++i)
      min_dist[i] = std::min(min_dist[i], sq_dist(points, i, best));
  }
  return selected;
}

std::vector<int> farthest_point_sample(const Matrix& points, int m) {
  const int n = points.rows;
  if (m < 1 || m > n)
    throw Error(ErrorCode::BadSampleCount,
                "m = " + std::to_string(m) + " for " + std::to_string(n) + " points");
  return farthest_point_sample(points, m, start_index(points));
}

std::vector<Neighborhood> knn_group(const Matrix& points, std::span<const int> center_indices,
                                    int k) {
  const int n = points.rows;
  if (k < 1 || k > n)
    throw Error(ErrorCode::BadNeighborCount,
                "k = " + std::to_string(k) + " for " + std::to_string(n) + " points");
  for (int c : center_indices) {
    if (c < 0 || c >= n)
      throw Error(ErrorCode::IndexOutOfRange, "center index " + std::to_string(c));
  }

  std::vector<Neighborhood> out;
  out.reserve(center_indices.size());
  std::vector<int> order(n);
  std::vector<double> dist(n);
  for (int c : center_indices) {
    for (int i = 0; i < n; ++i) dist[i] = sq_dist(points, i, c);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (dist[a] != dist[b]) return dist[a] < dist[b];
      const int cmp = lex_compare(points, a, b);
      return cmp != 0 ? cmp < 0 : a < b;
    });

    Neighborhood nb;
    nb.center_index = c;
    nb.neighbor_indices.reserve(k);
    nb.neighbor_indices.push_back(c);  // self first, distance zero
    for (int i = 0; i < n && nb.k() < k; ++i) {
      if (order[i] != c) nb.neighbor_indices.push_back(order[i]);
    }
    out.push_back(std::move(nb));
  }
  return out;
}

Matrix gather_features(const Matrix& features, const Neighborhood& nbhd) {
  Matrix out(nbhd.k(), features.cols);
  for (int r = 0; r < nbhd.k(); ++r) {
    const int idx = nbhd.neighbor_indices[r];
    if (idx < 0 || idx >= features.rows)
      throw Error(ErrorCode::IndexOutOfRange, "feature row " + std::to_string(idx));
    std::copy(features.row_ptr(idx), features.row_ptr(idx) + features.cols, out.row_ptr(r));
  }
  return out;
}

}  // namespace pointe
