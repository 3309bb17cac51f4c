#include "pointe/dse.hpp"

#include <cmath>

namespace pointe::dse {

ad::Var distance_factor(ad::Tape& t, const DseVars& vars, const Matrix& points) {
  if (points.cols != 3)
    throw Error(ErrorCode::ShapeMismatch, "points must be Mx3, got " + points.shape_str());
  const int m = points.rows;
  Matrix absxy(m, 2);
  for (int i = 0; i < m; ++i) {
    absxy.at(i, 0) = std::fabs(points.at(i, 0));
    absxy.at(i, 1) = std::fabs(points.at(i, 1));
  }
  ad::Var h = t.relu(t.add(t.matmul(t.constant(std::move(absxy)), vars.dist_w1),
                           t.broadcast_row(vars.dist_b1, m)));
  ad::Var soft =
      t.softmax_rows(t.add(t.matmul(h, vars.dist_w2), t.broadcast_row(vars.dist_b2, m)));
  // first softmax component
  Matrix pick(2, 1);
  pick.at(0, 0) = 1.0;
  ad::Var d = t.matmul(soft, t.constant(std::move(pick)));
  // clamp to [0.05, 1] built from relu so the gradient dies outside the range
  ad::Var lo = t.constant(Matrix::filled(m, 1, kDistFactorMin));
  ad::Var hi = t.constant(Matrix::filled(m, 1, kDistFactorMax));
  ad::Var clamped = t.add(lo, t.relu(t.subtract(d, lo)));
  return t.subtract(clamped, t.relu(t.subtract(clamped, hi)));
}

SemanticOut semantic_branch(ad::Tape& t, const DseVars& vars, ad::Var geo_features) {
  const int m = geo_features.rows();
  ad::Var h1 = t.relu(t.add(t.matmul(geo_features, vars.seg_w1), t.broadcast_row(vars.seg_b1, m)));
  ad::Var h2 = t.relu(t.add(t.matmul(h1, vars.seg_w2), t.broadcast_row(vars.seg_b2, m)));
  ad::Var h3 = t.relu(t.add(t.matmul(h2, vars.seg_w3), t.broadcast_row(vars.seg_b3, m)));
  ad::Var logit = t.add(t.matmul(h3, vars.seg_w4), t.broadcast_row(vars.seg_b4, m));
  return SemanticOut{t.sigmoid(logit), h3};
}

ad::Var distance_focal_loss(ad::Tape& t, ad::Var fg_prob,
                            const std::vector<uint8_t>& fg_labels, ad::Var d) {
  const int m = fg_prob.rows();
  if (fg_prob.cols() != 1 || d.cols() != 1)
    throw Error(ErrorCode::ShapeMismatch, "fg_prob and d must be Mx1");
  if (static_cast<int>(fg_labels.size()) != m || d.rows() != m)
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(fg_labels.size()) + " labels, " + std::to_string(d.rows()) +
                    " distance factors, " + std::to_string(m) + " probabilities");

  Matrix pos(m, 1), neg(m, 1);
  for (int i = 0; i < m; ++i) {
    pos.at(i, 0) = fg_labels[i] ? 1.0 : 0.0;
    neg.at(i, 0) = fg_labels[i] ? 0.0 : 1.0;
  }
  ad::Var ones = t.constant(Matrix::filled(m, 1, 1.0));
  ad::Var p_t = t.add(t.hadamard(t.constant(std::move(pos)), fg_prob),
                      t.hadamard(t.constant(std::move(neg)), t.subtract(ones, fg_prob)));
  ad::Var one_minus = t.subtract(ones, p_t);
  ad::Var inv_d = t.pow_elem(d, t.constant(Matrix::filled(m, 1, -1.0)));
  ad::Var weight = t.hadamard(d, t.pow_elem(one_minus, inv_d));
  ad::Var per_point = t.hadamard(weight, t.log(p_t));
  return t.scalar_mul(t.mean_reduce(per_point), -1.0);
}

ad::Var dse_enhance(ad::Tape& t, ad::Var geo_features, ad::Var sem_features) {
  return t.concat_cols(geo_features, sem_features);
}

}  // namespace pointe::dse
