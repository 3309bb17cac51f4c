#pragma once

#include <span>
#include <vector>

#include "pointe/matrix.hpp"

namespace pointe {

// A sampled center with its k grouped neighbor indices. The center is
// always its own first neighbor.
struct Neighborhood {
  int center_index = -1;
  std::vector<int> neighbor_indices;

  int k() const { return static_cast<int>(neighbor_indices.size()); }
};

// Greedy farthest-first selection of m indices. The start point maximizes
// distance from the centroid; every later pick maximizes the minimum
// distance to the already-selected set. All ties break on lexicographic
// (x,y,z), then lowest index, which makes the selected coordinate set a
// pure function of the input point set. The centroid is accumulated in
// lexicographic point order for the same reason.
std::vector<int> farthest_point_sample(const Matrix& points, int m);

// Same greedy selection from a caller-chosen start index.
std::vector<int> farthest_point_sample(const Matrix& points, int m, int start);

// k nearest neighbors of each center (self included, always first
// and at distance zero). Ties break on (distance, lexicographic
// coordinate, index).
std::vector<Neighborhood> knn_group(const Matrix& points, std::span<const int> center_indices,
                                    int k);

// Materializes the rows of `features` named by the neighborhood, in
// neighbor order.
Matrix gather_features(const Matrix& features, const Neighborhood& nbhd);

}  // namespace pointe
