#include "pointe/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "pointe/dse.hpp"
#include "pointe/rng.hpp"

namespace pointe {

SegLossKind seg_loss_from_name(const std::string& s) {
  if (s == "bce") return SegLossKind::bce;
  if (s == "focal_d1") return SegLossKind::focal_d1;
  if (s == "distance_focal") return SegLossKind::distance_focal;
  throw Error(ErrorCode::ConfigError, "unknown scene loss '" + s + "'");
}

const char* seg_loss_name(SegLossKind k) {
  switch (k) {
    case SegLossKind::bce: return "bce";
    case SegLossKind::focal_d1: return "focal_d1";
    case SegLossKind::distance_focal: return "distance_focal";
  }
  return "unknown";
}

namespace {

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

// -mean log p_t over the scene points
ad::Var bce_loss(ad::Tape& t, ad::Var fg_prob, const std::vector<uint8_t>& labels) {
  const int m = fg_prob.rows();
  Matrix pos(m, 1), neg(m, 1);
  for (int i = 0; i < m; ++i) {
    pos.at(i, 0) = labels[i] ? 1.0 : 0.0;
    neg.at(i, 0) = labels[i] ? 0.0 : 1.0;
  }
  ad::Var ones = t.constant(Matrix::filled(m, 1, 1.0));
  ad::Var p_t = t.add(t.hadamard(t.constant(std::move(pos)), fg_prob),
                      t.hadamard(t.constant(std::move(neg)), t.subtract(ones, fg_prob)));
  return t.scalar_mul(t.mean_reduce(t.log(p_t)), -1.0);
}

ad::Var cloud_loss(Model::Bound& bound, ad::Tape& t, const Dataset& data,
                   const TrainSchedule& sched, const PointCloud& cloud, int class_label) {
  switch (data.task) {
    case Task::classify:
      return heads::cross_entropy(t, bound.logits(cloud.points), class_label);
    case Task::segment:
      return heads::cross_entropy_rows(t, bound.part_logits(cloud.points), cloud.labels);
    case Task::scene_seg: {
      auto fwd = bound.scene(cloud.points);
      ad::Var seg;
      switch (sched.scene_loss) {
        case SegLossKind::bce:
          seg = bce_loss(t, fwd.fg_prob, cloud.fg_mask);
          break;
        case SegLossKind::focal_d1:
          seg = dse::distance_focal_loss(
              t, fwd.fg_prob, cloud.fg_mask,
              t.constant(Matrix::filled(fwd.fg_prob.rows(), 1, 1.0)));
          break;
        case SegLossKind::distance_focal:
          seg = dse::distance_focal_loss(t, fwd.fg_prob, cloud.fg_mask, fwd.d);
          break;
      }
      return t.scalar_mul(seg, sched.lambda_seg);
    }
  }
  throw Error(ErrorCode::ConfigError, "unhandled task");
}

}  // namespace

heads::Metrics evaluate_classification(Model& model, const std::vector<PointCloud>& clouds,
                                       const std::vector<int>& labels) {
  std::vector<int> preds;
  preds.reserve(clouds.size());
  for (const PointCloud& pc : clouds) {
    ad::Tape t;
    Model::Bound bound = model.bind(t, false);
    const Matrix& lg = bound.logits(pc.points).value();
    int best = 0;
    for (int c = 1; c < lg.cols; ++c)
      if (lg.at(0, c) > lg.at(0, best)) best = c;
    preds.push_back(best);
  }
  return heads::classification_metrics(preds, labels);
}

heads::Metrics evaluate_segmentation(Model& model, const std::vector<PointCloud>& clouds) {
  std::vector<std::vector<int>> preds, labels;
  for (const PointCloud& pc : clouds) {
    ad::Tape t;
    Model::Bound bound = model.bind(t, false);
    const Matrix& lg = bound.part_logits(pc.points).value();
    std::vector<int> p(lg.rows);
    for (int i = 0; i < lg.rows; ++i) {
      int best = 0;
      for (int c = 1; c < lg.cols; ++c)
        if (lg.at(i, c) > lg.at(i, best)) best = c;
      p[i] = best;
    }
    preds.push_back(std::move(p));
    labels.push_back(pc.labels);
  }
  return heads::segmentation_metrics(preds, labels, model.config().n_parts);
}

heads::SceneMetrics evaluate_scene(Model& model, const std::vector<PointCloud>& clouds,
                                   double threshold) {
  std::vector<uint8_t> pred, truth;
  std::vector<double> dist;
  for (const PointCloud& pc : clouds) {
    ad::Tape t;
    Model::Bound bound = model.bind(t, false);
    const Matrix& p = bound.scene(pc.points).fg_prob.value();
    for (int i = 0; i < p.rows; ++i) {
      pred.push_back(p.at(i, 0) >= threshold ? 1 : 0);
      truth.push_back(pc.fg_mask[i]);
      const double x = pc.points.at(i, 0), y = pc.points.at(i, 1);
      dist.push_back(std::sqrt(x * x + y * y));
    }
  }
  return heads::scene_metrics(pred, truth, dist);
}

double evaluate_task_metric(Model& model, const Dataset& data, bool test_split) {
  const auto& clouds = test_split ? data.test : data.train;
  switch (data.task) {
    case Task::classify:
      return evaluate_classification(model, clouds,
                                     test_split ? data.test_class : data.train_class)
          .oa;
    case Task::segment:
      return evaluate_segmentation(model, clouds).cls_miou;
    case Task::scene_seg:
      return evaluate_scene(model, clouds).fg_iou;
  }
  return 0.0;
}

TrainReport train_model(Model& model, const Dataset& data, const TrainSchedule& schedule,
                        std::ostream* log) {
  if (schedule.epochs < 1) throw Error(ErrorCode::ConfigError, "epochs must be >= 1");
  if (schedule.batch < 1) throw Error(ErrorCode::ConfigError, "batch must be >= 1");
  if (data.train.empty()) throw Error(ErrorCode::ConfigError, "empty training set");
  if (data.test.empty()) throw Error(ErrorCode::ConfigError, "empty test set");

  TrainReport report;
  switch (data.task) {
    case Task::classify: report.metric_name = "test_oa"; break;
    case Task::segment: report.metric_name = "test_cls_miou"; break;
    case Task::scene_seg: report.metric_name = "test_fg_iou"; break;
  }

  std::ostringstream log_copy;
  auto emit = [&](const std::string& line) {
    log_copy << line << '\n';
    if (log) (*log) << line << '\n';
  };
  emit("epoch\tloss\t" + report.metric_name);

  heads::Adam adam({schedule.lr, 0.9, 0.999, 1e-8});

  // per-epoch rng streams drawn up front so early stopping cannot shift them
  Rng seeder(schedule.seed);
  std::vector<uint64_t> epoch_seeds(schedule.epochs);
  for (auto& s : epoch_seeds) s = seeder.next_u64();

  const int n_train = static_cast<int>(data.train.size());
  std::vector<int> order(n_train);
  std::iota(order.begin(), order.end(), 0);

  report.best_metric = -1.0;
  for (int epoch = 1; epoch <= schedule.epochs; ++epoch) {
    Rng erng(epoch_seeds[epoch - 1]);
    erng.shuffle(order);

    double loss_sum = 0.0;
    int cursor = 0;
    while (cursor < n_train) {
      const int take = std::min(schedule.batch, n_train - cursor);
      model.params().zero_grad();
      for (int b = 0; b < take; ++b) {
        const int idx = order[cursor + b];
        const PointCloud* cloud = &data.train[idx];
        PointCloud jittered;
        if (schedule.jitter > 0.0) {
          jittered = *cloud;
          Rng jrng(epoch_seeds[epoch - 1] ^ (0x9e3779b97f4a7c15ULL * (idx + 1)));
          for (double& v : jittered.points.data) v += schedule.jitter * jrng.normal();
          cloud = &jittered;
        }
        ad::Tape tape;
        Model::Bound bound = model.bind(tape, true);
        ad::Var loss = cloud_loss(bound, tape, data, schedule, *cloud,
                                  data.task == Task::classify ? data.train_class[idx] : 0);
        tape.backward(loss);
        bound.accumulate_grads(1.0 / take);
        loss_sum += loss.value().data[0];
      }
      adam.step(model.params());
      cursor += take;
    }

    const double metric = evaluate_task_metric(model, data, true);
    const double mean_loss = loss_sum / n_train;
    emit(std::to_string(epoch) + "\t" + fmt(mean_loss) + "\t" + fmt(metric));
    report.epochs.push_back({epoch, mean_loss, metric});

    if (metric > report.best_metric) {
      report.best_metric = metric;
      report.best_epoch = epoch;
      report.best_params = model.params().all();
    }
    report.final_metric = metric;
    if (schedule.stop_at_metric > 0.0 && metric >= schedule.stop_at_metric) break;
  }

  report.log_text = log_copy.str();
  return report;
}

}  // namespace pointe
