#include "pointe/cloud.hpp"

#include <cmath>
#include <string>

namespace pointe {

void validate(const PointCloud& pc) {
  const int n = pc.points.rows;
  if (n < 1) throw Error(ErrorCode::EmptyCloud, "point cloud has no points");
  if (pc.points.cols != 3)
    throw Error(ErrorCode::ShapeMismatch, "points must be Nx3, got " + pc.points.shape_str());
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      if (!std::isfinite(pc.points.at(i, c)))
        throw Error(ErrorCode::NonFiniteCoordinate, "point " + std::to_string(i));
    }
  }
  if (pc.has_labels()) {
    if (static_cast<int>(pc.labels.size()) != n)
      throw Error(ErrorCode::LabelLengthMismatch,
                  std::to_string(pc.labels.size()) + " labels for " + std::to_string(n) +
                      " points");
    for (size_t i = 0; i < pc.labels.size(); ++i) {
      if (pc.labels[i] < 0)
        throw Error(ErrorCode::LabelLengthMismatch, "negative label at " + std::to_string(i));
    }
  }
  if (pc.has_fg_mask() && static_cast<int>(pc.fg_mask.size()) != n)
    throw Error(ErrorCode::LabelLengthMismatch,
                std::to_string(pc.fg_mask.size()) + " mask entries for " + std::to_string(n) +
                    " points");
}

PointCloud center_and_scale(const PointCloud& pc) {
  validate(pc);
  const int n = pc.points.rows;
  double cx = 0, cy = 0, cz = 0;
  for (int i = 0; i < n; ++i) {
    cx += pc.points.at(i, 0);
    cy += pc.points.at(i, 1);
    cz += pc.points.at(i, 2);
  }
  cx /= n;
  cy /= n;
  cz /= n;

  PointCloud out = pc;
  double max_norm = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = pc.points.at(i, 0) - cx;
    const double y = pc.points.at(i, 1) - cy;
    const double z = pc.points.at(i, 2) - cz;
    out.points.at(i, 0) = x;
    out.points.at(i, 1) = y;
    out.points.at(i, 2) = z;
    max_norm = std::max(max_norm, std::sqrt(x * x + y * y + z * z));
  }
  if (max_norm < 1e-12) {
    for (double& v : out.points.data) v = 0.0;
    return out;
  }
  for (double& v : out.points.data) v /= max_norm;
  return out;
}

}  // namespace pointe
