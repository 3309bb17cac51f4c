#include "pointe/mge.hpp"

#include <cmath>

#include "pointe/sampling.hpp"
#include "pointe/surface.hpp"

namespace pointe::mge {

Matrix standardized_offsets(const Matrix& neighbor_points, const Matrix& center_point) {
  const int k = neighbor_points.rows;
  if (neighbor_points.cols != 3 || center_point.cols != 3 || center_point.rows != 1)
    throw Error(ErrorCode::ShapeMismatch, "offsets expect kx3 neighbors and 1x3 center");
  Matrix off(k, 3);
  for (int j = 0; j < k; ++j)
    for (int c = 0; c < 3; ++c)
      off.at(j, c) = neighbor_points.at(j, c) - center_point.at(0, c);

  double mean[3] = {0, 0, 0};
  for (int j = 0; j < k; ++j)
    for (int c = 0; c < 3; ++c) mean[c] += off.at(j, c);
  for (double& m : mean) m /= k;

  double var[3] = {0, 0, 0};
  for (int j = 0; j < k; ++j) {
    for (int c = 0; c < 3; ++c) {
      const double d = off.at(j, c) - mean[c];
      var[c] += d * d;
    }
  }
  double sd[3];
  for (int c = 0; c < 3; ++c) sd[c] = std::max(std::sqrt(var[c] / k), 1e-5);

  for (int j = 0; j < k; ++j)
    for (int c = 0; c < 3; ++c) off.at(j, c) = (off.at(j, c) - mean[c]) / sd[c];
  return off;
}

ad::Var pos_encode(ad::Tape& t, const PosEncoderVars& enc, ad::Var input) {
  const int n = input.rows();
  ad::Var h = t.relu(t.add(t.matmul(input, enc.w1), t.broadcast_row(enc.b1, n)));
  return t.add(t.matmul(h, enc.w2), t.broadcast_row(enc.b2, n));
}

ad::Var spatial_branch(ad::Tape& t, ad::Var center_feat, ad::Var neighbor_feats,
                       const Matrix& neighbor_points, const Matrix& center_point,
                       const PosEncoderVars& enc) {
  const int k = neighbor_feats.rows();
  if (center_feat.rows() != 1 || center_feat.cols() != neighbor_feats.cols())
    throw Error(ErrorCode::ShapeMismatch, "center/neighbor feature width mismatch");
  if (neighbor_points.rows != k)
    throw Error(ErrorCode::ShapeMismatch, "neighbor point/feature count mismatch");

  ad::Var cat = t.concat_cols(t.broadcast_row(center_feat, k), neighbor_feats);
  ad::Var pe = pos_encode(t, enc, t.constant(standardized_offsets(neighbor_points, center_point)));
  ad::Var e = t.hadamard(t.add(cat, pe), pe);
  return t.max_reduce_rows(e);
}

ad::Var maa_aggregate(ad::Tape& t,
                      std::span<const std::pair<MaaBranchVars, ad::Var>> branches) {
  if (branches.empty()) throw Error(ErrorCode::ShapeMismatch, "maa_aggregate: no branches");
  ad::Var out;
  for (const auto& [params, feat] : branches) {
    const int rows = feat.rows();
    ad::Var term = t.add(t.hadamard(t.broadcast_row(params.alpha, rows), feat),
                         t.broadcast_row(params.beta, rows));
    out = out.valid() ? t.add(out, term) : term;
  }
  return out;
}

ad::Var concat_aggregate(ad::Tape& t, ad::Var proj_w, ad::Var proj_b,
                         std::span<const ad::Var> branches) {
  if (branches.empty()) throw Error(ErrorCode::ShapeMismatch, "concat_aggregate: no branches");
  ad::Var cat = branches[0];
  for (size_t i = 1; i < branches.size(); ++i) cat = t.concat_cols(cat, branches[i]);
  return t.add(t.matmul(cat, proj_w), t.broadcast_row(proj_b, cat.rows()));
}

StageOutput mge_stage(ad::Tape& t, const Matrix& points, ad::Var features,
                      const EncoderConfig::Stage& stage, const StageVars& vars,
                      const EncoderConfig& cfg) {
  if (features.rows() != points.rows)
    throw Error(ErrorCode::ShapeMismatch, "feature rows must match point count");
  const int m = stage.sample_count;
  const int k = stage.neighbor_count;

  const std::vector<int> centers = farthest_point_sample(points, m);
  const std::vector<Neighborhood> nbhds = knn_group(points, centers, k);

  // flatten the grouping so the positional encoding and the elementwise
  // neighbor combination run as one batched pass over all m*k neighbor slots
  std::vector<int> flat_neighbors;
  std::vector<int> flat_centers;
  flat_neighbors.reserve(static_cast<size_t>(m) * k);
  flat_centers.reserve(static_cast<size_t>(m) * k);
  Matrix offsets(m * k, 3);
  Matrix normals(m, 3);
  Matrix curvatures(m, 3);
  Matrix center_coords(m, 3);

  for (int c = 0; c < m; ++c) {
    const Neighborhood& nb = nbhds[c];
    Matrix nbr_pts = gather_features(points, nb);
    Matrix center_pt(1, 3);
    for (int i = 0; i < 3; ++i) {
      center_pt.at(0, i) = points.at(nb.center_index, i);
      center_coords.at(c, i) = center_pt.at(0, i);
    }
    const Matrix dp = standardized_offsets(nbr_pts, center_pt);
    std::copy(dp.data.begin(), dp.data.end(), offsets.row_ptr(c * k));

    for (int j = 0; j < nb.k(); ++j) {
      flat_neighbors.push_back(nb.neighbor_indices[j]);
      flat_centers.push_back(nb.center_index);
    }

    SurfaceDescriptor sd;
    if (k >= 3) {
      sd = surface_descriptor(nbr_pts);
    } else {
      // too small for a covariance fit; same outputs as a zero matrix
      sd.normal = {0.0, 0.0, 1.0};
      sd.curvature = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    }
    for (int i = 0; i < 3; ++i) {
      normals.at(c, i) = sd.normal[i];
      curvatures.at(c, i) = sd.curvature[i];
    }
  }

  // spatial branch over all neighborhoods at once; row layout matches the
  // per-neighborhood form exactly
  ad::Var nbr_feats = t.gather_rows(features, flat_neighbors);
  ad::Var ctr_feats = t.gather_rows(features, flat_centers);
  ad::Var cat = t.concat_cols(ctr_feats, nbr_feats);
  ad::Var pe = pos_encode(t, vars.pose_spatial, t.constant(std::move(offsets)));
  ad::Var e = t.hadamard(t.add(cat, pe), pe);

  std::vector<ad::Var> pooled;
  pooled.reserve(m);
  for (int c = 0; c < m; ++c) {
    std::vector<int> block(k);
    for (int j = 0; j < k; ++j) block[j] = c * k + j;
    pooled.push_back(t.max_reduce_rows(t.gather_rows(e, std::move(block))));
  }
  ad::Var f_s = t.concat_rows(pooled);

  std::vector<std::pair<MaaBranchVars, ad::Var>> maa_branches;
  std::vector<ad::Var> cat_branches;
  maa_branches.emplace_back(vars.maa_spatial, f_s);
  cat_branches.push_back(f_s);
  if (cfg.use_normal) {
    ad::Var f_n = pos_encode(t, vars.pose_normal, t.constant(std::move(normals)));
    maa_branches.emplace_back(vars.maa_normal, f_n);
    cat_branches.push_back(f_n);
  }
  if (cfg.use_curvature) {
    ad::Var f_c = pos_encode(t, vars.pose_curvature, t.constant(std::move(curvatures)));
    maa_branches.emplace_back(vars.maa_curvature, f_c);
    cat_branches.push_back(f_c);
  }

  StageOutput out;
  out.centers = std::move(center_coords);
  out.features = cfg.aggregation == Aggregation::maa
                     ? maa_aggregate(t, maa_branches)
                     : concat_aggregate(t, vars.concat_w, vars.concat_b, cat_branches);
  return out;
}

EncodeResult mge_encode(ad::Tape& t, const Matrix& points, const EncoderConfig& cfg,
                        const EncoderVars& vars) {
  cfg.validate(points.rows);
  EncodeResult result;
  result.lift_features =
      t.add(t.matmul(t.constant(points), vars.lift_w), t.broadcast_row(vars.lift_b, points.rows));

  Matrix level_points = points;
  ad::Var level_features = result.lift_features;
  for (size_t s = 0; s < cfg.stages.size(); ++s) {
    StageOutput stage = mge_stage(t, level_points, level_features, cfg.stages[s],
                                  vars.stages[s], cfg);
    level_points = stage.centers;
    level_features = stage.features;
    result.stages.push_back(std::move(stage));
  }
  return result;
}

}  // namespace pointe::mge
