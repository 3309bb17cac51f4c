#include "pointe/heads.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pointe::heads {

ad::Var classify(ad::Tape& t, ad::Var stage_features, const ClassifierVars& head) {
  ad::Var pooled = t.max_reduce_rows(stage_features);
  ad::Var h = t.relu(t.add(t.matmul(pooled, head.w1), head.b1));
  return t.add(t.matmul(h, head.w2), head.b2);
}

Matrix interp_weights(const Matrix& coarse_centers, const Matrix& fine_points) {
  const int mc = coarse_centers.rows;
  const int mf = fine_points.rows;
  if (mc < 1) throw Error(ErrorCode::ShapeMismatch, "no coarse centers");
  Matrix w(mf, mc);
  const int use = std::min(3, mc);
  std::vector<int> order(mc);
  std::vector<double> dist(mc);
  for (int i = 0; i < mf; ++i) {
    const double* p = fine_points.row_ptr(i);
    for (int j = 0; j < mc; ++j) {
      const double* q = coarse_centers.row_ptr(j);
      const double dx = p[0] - q[0], dy = p[1] - q[1], dz = p[2] - q[2];
      dist[j] = std::sqrt(dx * dx + dy * dy + dz * dz);
    }
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return dist[a] != dist[b] ? dist[a] < dist[b] : a < b;
    });
    if (dist[order[0]] < 1e-12) {
      w.at(i, order[0]) = 1.0;  // exact copy on coincidence
      continue;
    }
    double sum = 0.0;
    for (int j = 0; j < use; ++j) sum += 1.0 / (dist[order[j]] + 1e-8);
    for (int j = 0; j < use; ++j) w.at(i, order[j]) = 1.0 / (dist[order[j]] + 1e-8) / sum;
  }
  return w;
}

ad::Var feature_propagate(ad::Tape& t, const mge::StageOutput& coarse,
                          const Matrix& fine_points, std::optional<ad::Var> fine_features) {
  ad::Var interp =
      t.matmul(t.constant(interp_weights(coarse.centers, fine_points)), coarse.features);
  if (!fine_features) return interp;
  return t.concat_cols(interp, *fine_features);
}

ad::Var cross_entropy(ad::Tape& t, ad::Var logits, int label) {
  if (logits.rows() != 1)
    throw Error(ErrorCode::ShapeMismatch, "logits must be 1xN");
  if (label < 0 || label >= logits.cols())
    throw Error(ErrorCode::BadLabel,
                "label " + std::to_string(label) + " for " + std::to_string(logits.cols()) +
                    " classes");
  Matrix onehot(1, logits.cols());
  onehot.at(0, label) = 1.0;
  ad::Var picked = t.hadamard(t.log(t.softmax_rows(logits)), t.constant(std::move(onehot)));
  return t.scalar_mul(t.sum_reduce(picked), -1.0);
}

ad::Var cross_entropy_rows(ad::Tape& t, ad::Var logits, std::span<const int> labels) {
  const int m = logits.rows();
  if (static_cast<int>(labels.size()) != m)
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(labels.size()) + " labels for " + std::to_string(m) + " rows");
  Matrix onehot(m, logits.cols());
  for (int i = 0; i < m; ++i) {
    if (labels[i] < 0 || labels[i] >= logits.cols())
      throw Error(ErrorCode::BadLabel, "label " + std::to_string(labels[i]));
    onehot.at(i, labels[i]) = 1.0;
  }
  ad::Var picked = t.hadamard(t.log(t.softmax_rows(logits)), t.constant(std::move(onehot)));
  return t.scalar_mul(t.sum_reduce(picked), -1.0 / m);
}

Metrics classification_metrics(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size())
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(predictions.size()) + " predictions, " +
                    std::to_string(labels.size()) + " labels");
  if (labels.empty()) throw Error(ErrorCode::LengthMismatch, "no samples");

  int max_class = 0;
  for (int l : labels) max_class = std::max(max_class, l);
  for (int p : predictions) max_class = std::max(max_class, p);

  std::vector<long> per_class_total(max_class + 1, 0), per_class_correct(max_class + 1, 0);
  long correct = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    per_class_total[labels[i]]++;
    if (predictions[i] == labels[i]) {
      per_class_correct[labels[i]]++;
      correct++;
    }
  }
  Metrics m;
  m.oa = static_cast<double>(correct) / labels.size();
  double acc_sum = 0.0;
  int present = 0;
  for (int c = 0; c <= max_class; ++c) {
    if (per_class_total[c] == 0) continue;
    acc_sum += static_cast<double>(per_class_correct[c]) / per_class_total[c];
    present++;
  }
  m.macc = present ? acc_sum / present : 0.0;
  return m;
}

Metrics segmentation_metrics(const std::vector<std::vector<int>>& predictions,
                             const std::vector<std::vector<int>>& labels, int n_parts) {
  if (predictions.size() != labels.size())
    throw Error(ErrorCode::LengthMismatch, "prediction/label shape count mismatch");
  if (predictions.empty()) throw Error(ErrorCode::LengthMismatch, "no shapes");

  const size_t n_shapes = predictions.size();
  // iou[s][p] for shape s, part p
  std::vector<std::vector<double>> iou(n_shapes, std::vector<double>(n_parts, 1.0));
  long total_points = 0, correct_points = 0;

  for (size_t s = 0; s < n_shapes; ++s) {
    const auto& pred = predictions[s];
    const auto& lab = labels[s];
    if (pred.size() != lab.size())
      throw Error(ErrorCode::LengthMismatch, "shape " + std::to_string(s));
    std::vector<long> inter(n_parts, 0), uni(n_parts, 0);
    for (size_t i = 0; i < pred.size(); ++i) {
      if (pred[i] < 0 || pred[i] >= n_parts || lab[i] < 0 || lab[i] >= n_parts)
        throw Error(ErrorCode::BadLabel, "part id out of range in shape " + std::to_string(s));
      if (pred[i] == lab[i]) {
        inter[pred[i]]++;
        uni[pred[i]]++;
        correct_points++;
      } else {
        uni[pred[i]]++;
        uni[lab[i]]++;
      }
      total_points++;
    }
    for (int p = 0; p < n_parts; ++p) {
      // parts absent from both prediction and truth keep IoU 1
      if (uni[p] > 0) iou[s][p] = static_cast<double>(inter[p]) / uni[p];
    }
  }

  Metrics m;
  m.oa = total_points ? static_cast<double>(correct_points) / total_points : 0.0;

  // class mIoU: average each part over shapes, then average parts
  double cls_sum = 0.0;
  for (int p = 0; p < n_parts; ++p) {
    double part_sum = 0.0;
    for (size_t s = 0; s < n_shapes; ++s) part_sum += iou[s][p];
    cls_sum += part_sum / static_cast<double>(n_shapes);
  }
  m.cls_miou = n_parts ? cls_sum / n_parts : 0.0;

  // instance mIoU: average parts within each shape, then average shapes
  double inst_sum = 0.0;
  for (size_t s = 0; s < n_shapes; ++s) {
    double shape_sum = 0.0;
    for (int p = 0; p < n_parts; ++p) shape_sum += iou[s][p];
    inst_sum += shape_sum / n_parts;
  }
  m.inst_miou = inst_sum / static_cast<double>(n_shapes);
  return m;
}

SceneMetrics scene_metrics(std::span<const uint8_t> pred_fg, std::span<const uint8_t> true_fg,
                           std::span<const double> xy_dist) {
  if (pred_fg.size() != true_fg.size() || pred_fg.size() != xy_dist.size())
    throw Error(ErrorCode::LengthMismatch, "scene metric input lengths differ");

  long inter = 0, uni = 0, tp = 0, fg_total = 0;
  for (size_t i = 0; i < pred_fg.size(); ++i) {
    const bool p = pred_fg[i] != 0, g = true_fg[i] != 0;
    if (p && g) inter++;
    if (p || g) uni++;
    if (g) {
      fg_total++;
      if (p) tp++;
    }
  }
  SceneMetrics m;
  m.fg_iou = uni ? static_cast<double>(inter) / uni : 1.0;
  m.fg_recall = fg_total ? static_cast<double>(tp) / fg_total : 1.0;

  // terciles over foreground points by xy distance
  std::vector<size_t> fg_idx;
  for (size_t i = 0; i < true_fg.size(); ++i)
    if (true_fg[i]) fg_idx.push_back(i);
  if (fg_idx.empty()) {
    m.recall_near = m.recall_mid = m.recall_far = 1.0;
    return m;
  }
  std::sort(fg_idx.begin(), fg_idx.end(), [&](size_t a, size_t b) {
    return xy_dist[a] != xy_dist[b] ? xy_dist[a] < xy_dist[b] : a < b;
  });
  const size_t n = fg_idx.size();
  auto tercile_recall = [&](size_t lo, size_t hi) {
    long hits = 0;
    for (size_t i = lo; i < hi; ++i)
      if (pred_fg[fg_idx[i]]) hits++;
    return hi > lo ? static_cast<double>(hits) / (hi - lo) : 1.0;
  };
  m.recall_near = tercile_recall(0, n / 3);
  m.recall_mid = tercile_recall(n / 3, 2 * n / 3);
  m.recall_far = tercile_recall(2 * n / 3, n);
  return m;
}

void Adam::step(ParamRegistry& params) {
  auto& all = params.all();
  if (m_.empty()) {
    m_.reserve(all.size());
    v_.reserve(all.size());
    for (const Parameter& p : all) {
      m_.push_back(Matrix::zeros(p.value.rows, p.value.cols));
      v_.push_back(Matrix::zeros(p.value.rows, p.value.cols));
    }
  }
  if (m_.size() != all.size())
    throw Error(ErrorCode::ShapeMismatch, "registry changed size under the optimizer");

  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (size_t i = 0; i < all.size(); ++i) {
    Parameter& p = all[i];
    require_same_shape(p.value, p.grad, "adam grad");
    for (size_t j = 0; j < p.value.data.size(); ++j) {
      const double g = p.grad.data[j];
      double& m = m_[i].data[j];
      double& v = v_[i].data[j];
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
      p.value.data[j] -= cfg_.lr * (m / c1) / (std::sqrt(v / c2) + cfg_.eps);
    }
  }
}

}  // namespace pointe::heads
