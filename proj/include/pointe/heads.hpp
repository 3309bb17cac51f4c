#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pointe/autodiff.hpp"
#include "pointe/matrix.hpp"
#include "pointe/mge.hpp"
#include "pointe/params.hpp"

namespace pointe::heads {

// Two affine layers with a relu between, applied after global max pooling.
struct ClassifierVars {
  ad::Var w1, b1, w2, b2;
};

// Global channel-wise max over the remaining centers, then the head MLP.
// Returns 1 x num_classes logits.
ad::Var classify(ad::Tape& t, ad::Var stage_features, const ClassifierVars& head);

// Inverse-distance interpolation weights over the 3 nearest coarse centers
// (1/(dist+1e-8), normalized per fine point). A fine point closer than
// 1e-12 to a coarse center copies that center's row exactly. Rows sum
// to 1.
Matrix interp_weights(const Matrix& coarse_centers, const Matrix& fine_points);

// Carries coarse features to fine resolution, concatenating skip features
// when present: concat(interpolated, fine_features).
ad::Var feature_propagate(ad::Tape& t, const mge::StageOutput& coarse,
                          const Matrix& fine_points, std::optional<ad::Var> fine_features);

// -log softmax(logits)[label] for 1 x n logits.
ad::Var cross_entropy(ad::Tape& t, ad::Var logits, int label);

// Mean over points of -log softmax(row)[label], for M x n logits.
ad::Var cross_entropy_rows(ad::Tape& t, ad::Var logits, std::span<const int> labels);

struct Metrics {
  double oa = 0.0;
  double macc = 0.0;
  double cls_miou = 0.0;
  double inst_miou = 0.0;
};

// Overall accuracy and mean per-class accuracy; classes absent from the
// labels are excluded from the mean.
Metrics classification_metrics(std::span<const int> predictions, std::span<const int> labels);

// Class-averaged and instance-averaged mean IoU over a set of shapes. A
// part absent from both prediction and ground truth of a shape counts as
// IoU 1 for that shape.
Metrics segmentation_metrics(const std::vector<std::vector<int>>& predictions,
                             const std::vector<std::vector<int>>& labels, int n_parts);

struct SceneMetrics {
  double fg_iou = 0.0;
  double fg_recall = 0.0;
  // foreground recall by xy-distance tercile
  double recall_near = 0.0;
  double recall_mid = 0.0;
  double recall_far = 0.0;
};

// Pooled binary segmentation metrics; xy_dist carries sqrt(x^2+y^2) per
// point and defines the foreground terciles.
SceneMetrics scene_metrics(std::span<const uint8_t> pred_fg, std::span<const uint8_t> true_fg,
                           std::span<const double> xy_dist);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected adaptive-moment update over a parameter registry.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(ParamRegistry& params);
  int step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  int t_ = 0;
  std::vector<Matrix> m_, v_;
};

}  // namespace pointe::heads
