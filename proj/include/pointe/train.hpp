#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "pointe/cloud.hpp"
#include "pointe/heads.hpp"
#include "pointe/model.hpp"
#include "pointe/task.hpp"

namespace pointe {

// Loss used by the scene (foreground/background) task.
enum class SegLossKind {
  bce,             // -mean log p_t
  focal_d1,        // distance-modulated focal with d fixed at 1
  distance_focal,  // full loss with learned d
};

SegLossKind seg_loss_from_name(const std::string& s);
const char* seg_loss_name(SegLossKind k);

struct Dataset {
  Task task = Task::classify;
  std::vector<PointCloud> train, test;
  std::vector<int> train_class, test_class;  // classify only
  int n_classes = 0;
  int n_parts = 0;
};

struct TrainSchedule {
  int epochs = 50;
  int batch = 8;
  double lr = 1e-3;
  uint64_t seed = 1;
  double stop_at_metric = 0.0;  // stop once the test metric reaches this; 0 disables
  double lambda_seg = 1.0;      // scale on the scene segmentation loss
  double jitter = 0.0;          // optional Gaussian coordinate jitter on train clouds
  SegLossKind scene_loss = SegLossKind::distance_focal;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double metric = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::string metric_name;
  int best_epoch = 0;
  double best_metric = 0.0;
  double final_metric = 0.0;
  std::vector<Parameter> best_params;  // snapshot at the best epoch
  std::string log_text;                // exactly what was streamed to `log`
};

// Deterministic given (model init, dataset, schedule.seed): fixed shuffles,
// sequential batch accumulation, one optimizer step per batch. Writes one
// tab-separated record per epoch to `log` when given.
TrainReport train_model(Model& model, const Dataset& data, const TrainSchedule& schedule,
                        std::ostream* log);

heads::Metrics evaluate_classification(Model& model, const std::vector<PointCloud>& clouds,
                                       const std::vector<int>& labels);
heads::Metrics evaluate_segmentation(Model& model, const std::vector<PointCloud>& clouds);
heads::SceneMetrics evaluate_scene(Model& model, const std::vector<PointCloud>& clouds,
                                   double threshold = 0.5);

// The scalar metric the task optimizes for: OA, class mIoU, or fg IoU.
double evaluate_task_metric(Model& model, const Dataset& data, bool test_split);

}  // namespace pointe
