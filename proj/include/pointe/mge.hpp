#pragma once

#include <span>
#include <utility>
#include <vector>

#include "pointe/autodiff.hpp"
#include "pointe/encoder_config.hpp"
#include "pointe/matrix.hpp"

namespace pointe::mge {

// Two affine layers with a relu between: relu(x*w1 + b1)*w2 + b2. Lifts a
// low-dimensional geometric vector (offset, normal, curvature) into
// feature space.
struct PosEncoderVars {
  ad::Var w1, b1, w2, b2;
};

// Channel-wise learnable scale and bias of one aggregation branch.
struct MaaBranchVars {
  ad::Var alpha, beta;  // 1 x C each
};

// Everything one encoder stage needs bound on the current tape. Vars for
// disabled branches are left invalid.
struct StageVars {
  PosEncoderVars pose_spatial;
  PosEncoderVars pose_normal;
  PosEncoderVars pose_curvature;
  MaaBranchVars maa_spatial;
  MaaBranchVars maa_normal;
  MaaBranchVars maa_curvature;
  ad::Var concat_w, concat_b;  // aggregation == concat only
};

struct EncoderVars {
  ad::Var lift_w, lift_b;  // 3 -> embed_dim
  std::vector<StageVars> stages;
};

struct StageOutput {
  Matrix centers;     // M x 3
  ad::Var features;   // M x C
};

struct EncodeResult {
  ad::Var lift_features;             // N x embed_dim
  std::vector<StageOutput> stages;   // one per configured stage
};

// Offsets of the neighborhood points from the center, standardized by the
// per-neighborhood mean and per-coordinate std (population, floored at
// 1e-5).
Matrix standardized_offsets(const Matrix& neighbor_points, const Matrix& center_point);

ad::Var pos_encode(ad::Tape& t, const PosEncoderVars& enc, ad::Var input);

// Spatial neighbor encoding of one neighborhood:
//   e_j = (concat(f_c, f_j) + PosE(dp_j)) .* PosE(dp_j)
// followed by a channel-wise max over the k neighbors.
ad::Var spatial_branch(ad::Tape& t, ad::Var center_feat, ad::Var neighbor_feats,
                       const Matrix& neighbor_points, const Matrix& center_point,
                       const PosEncoderVars& enc);

// Adaptive aggregation: sum over branches of (alpha .* f + beta), rows
// broadcast across the batch.
ad::Var maa_aggregate(ad::Tape& t,
                      std::span<const std::pair<MaaBranchVars, ad::Var>> branches);

// Ablation baseline: concatenate branch features and project back to C
// channels with one affine map.
ad::Var concat_aggregate(ad::Tape& t, ad::Var proj_w, ad::Var proj_b,
                         std::span<const ad::Var> branches);

// One sampling + grouping + aggregation stage. `features` must have one
// row per input point; output width is twice the input width.
StageOutput mge_stage(ad::Tape& t, const Matrix& points, ad::Var features,
                      const EncoderConfig::Stage& stage, const StageVars& vars,
                      const EncoderConfig& cfg);

// Affine lift of raw coordinates to embed_dim channels, then the chained
// stages.
EncodeResult mge_encode(ad::Tape& t, const Matrix& points, const EncoderConfig& cfg,
                        const EncoderVars& vars);

}  // namespace pointe::mge
