#pragma once

#include <cstdint>
#include <vector>

#include "pointe/matrix.hpp"

namespace pointe {

// N x 3 coordinates with optional per-point labels and an optional
// foreground mask. Empty vectors mean "absent". Immutable by convention
// after construction.
struct PointCloud {
  Matrix points;                 // N x 3
  std::vector<int> labels;       // per-point class / part id, or empty
  std::vector<uint8_t> fg_mask;  // 1 = foreground, or empty

  int size() const { return points.rows; }
  bool has_labels() const { return !labels.empty(); }
  bool has_fg_mask() const { return !fg_mask.empty(); }
};

// Throws Error unless all PointCloud invariants hold:
//   N >= 1, all coordinates finite, labels (if present) length N and >= 0,
//   fg_mask (if present) length N.
void validate(const PointCloud& pc);

// Translates the centroid to the origin and scales so the farthest point
// sits on the unit sphere. A cloud of coincident points maps to all zeros.
// Idempotent. Object-level preprocessing only; scene clouds keep their
// absolute coordinates.
PointCloud center_and_scale(const PointCloud& pc);

}  // namespace pointe
