#pragma once

#include <cstdint>
#include <vector>

#include "pointe/autodiff.hpp"
#include "pointe/matrix.hpp"

namespace pointe::dse {

// Per-tape bindings of the semantic enhancement parameters: a four-layer
// foreground/background branch (C -> C -> C/2 -> C/4 -> 1, relu between,
// sigmoid on the last) and a two-layer distance branch (2 -> 8 -> 2, relu
// between, row-softmax on the output).
struct DseVars {
  ad::Var seg_w1, seg_b1, seg_w2, seg_b2, seg_w3, seg_b3, seg_w4, seg_b4;
  ad::Var dist_w1, dist_b1, dist_w2, dist_b2;
};

inline constexpr double kDistFactorMin = 0.05;
inline constexpr double kDistFactorMax = 1.0;

// Learned distance factor per point from (|x|, |y|): first softmax
// component, clamped to [0.05, 1]. Returns M x 1.
ad::Var distance_factor(ad::Tape& t, const DseVars& vars, const Matrix& points);

struct SemanticOut {
  ad::Var fg_prob;       // M x 1, sigmoid output
  ad::Var sem_features;  // M x C/4, third-layer activations
};

SemanticOut semantic_branch(ad::Tape& t, const DseVars& vars, ad::Var geo_features);

// Distance-modulated focal loss, mean over points:
//   -d * (1 - p_t)^(1/d) * log(p_t)
// with p_t = p for foreground points and 1-p otherwise. Differentiable in
// both fg_prob and d.
ad::Var distance_focal_loss(ad::Tape& t, ad::Var fg_prob,
                            const std::vector<uint8_t>& fg_labels, ad::Var d);

// concat(geometric features, semantic features) per point.
ad::Var dse_enhance(ad::Tape& t, ad::Var geo_features, ad::Var sem_features);

}  // namespace pointe::dse
