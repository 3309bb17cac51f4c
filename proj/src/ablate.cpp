#include "pointe/ablate.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <sstream>
#include <thread>

#include "pointe/train.hpp"

namespace pointe {

namespace {

struct RowSpec {
  std::string name;
  bool use_normal;
  bool use_curvature;
  Aggregation aggregation;
  SegLossKind scene_loss;
};

std::vector<RowSpec> grid_rows(const std::string& grid) {
  if (grid == "geometry") {
    return {
        {"spatial_only", false, false, Aggregation::maa, SegLossKind::bce},
        {"spatial+normal", true, false, Aggregation::maa, SegLossKind::bce},
        {"spatial+curvature", false, true, Aggregation::maa, SegLossKind::bce},
        {"all_concat", true, true, Aggregation::concat, SegLossKind::bce},
        {"all_maa", true, true, Aggregation::maa, SegLossKind::bce},
    };
  }
  if (grid == "dse") {
    return {
        {"baseline", false, false, Aggregation::maa, SegLossKind::bce},
        {"mge", true, true, Aggregation::maa, SegLossKind::bce},
        {"dse_wo_d", true, true, Aggregation::maa, SegLossKind::focal_d1},
        {"dse_w_d", true, true, Aggregation::maa, SegLossKind::distance_focal},
    };
  }
  throw Error(ErrorCode::ConfigError, "unknown ablation grid '" + grid + "'");
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

int ablation_threads(int n_jobs) {
  int threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;
  if (const char* env = std::getenv("POINTE_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) threads = cap;
  }
  return std::min(threads, std::max(1, n_jobs));
}

std::vector<AblationRow> run_ablation(const RunConfig& cfg, std::ostream* progress) {
  const std::vector<RowSpec> rows = grid_rows(cfg.ablate_grid);
  const Task expected = cfg.ablate_grid == "dse" ? Task::scene_seg : Task::segment;
  if (cfg.task != expected)
    throw Error(ErrorCode::ConfigError, std::string("ablate.grid '") + cfg.ablate_grid +
                                            "' needs task = " + task_name(expected));

  const Dataset data = build_dataset(cfg);
  const int n_rows = static_cast<int>(rows.size());
  const int n_seeds = static_cast<int>(cfg.ablate_seeds.size());

  struct RunResult {
    double metric = 0.0;
    heads::SceneMetrics scene;
    long params = 0;
  };
  std::vector<RunResult> results(static_cast<size_t>(n_rows) * n_seeds);

  auto run_one = [&](int row_idx, int seed_idx) {
    const RowSpec& row = rows[row_idx];
    RunConfig rc = cfg;
    rc.encoder.use_normal = row.use_normal;
    rc.encoder.use_curvature = row.use_curvature;
    rc.encoder.aggregation = row.aggregation;
    rc.train.scene_loss = row.scene_loss;
    rc.train.seed = cfg.ablate_seeds[seed_idx];

    Model model(model_config_from(rc), rc.train.seed);
    const TrainReport report = train_model(model, data, rc.train, nullptr);
    model.load_values(report.best_params);  // score the saved best checkpoint

    RunResult rr;
    rr.params = model.params().total_count();
    if (cfg.task == Task::scene_seg) {
      rr.scene = evaluate_scene(model, data.test);
      rr.metric = rr.scene.fg_iou;
    } else {
      rr.metric = evaluate_segmentation(model, data.test).cls_miou;
    }
    results[static_cast<size_t>(row_idx) * n_seeds + seed_idx] = rr;
    if (progress) {
      static std::mutex mu;
      std::lock_guard<std::mutex> lock(mu);
      (*progress) << "# " << row.name << " seed " << cfg.ablate_seeds[seed_idx] << " -> "
                  << fmt(rr.metric) << "\n";
    }
  };

  const int n_jobs = n_rows * n_seeds;
  const int threads = ablation_threads(n_jobs);
  if (threads <= 1) {
    for (int j = 0; j < n_jobs; ++j) run_one(j / n_seeds, j % n_seeds);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&]() {
        for (int j = next.fetch_add(1); j < n_jobs; j = next.fetch_add(1))
          run_one(j / n_seeds, j % n_seeds);
      });
    }
    for (auto& th : pool) th.join();
  }

  std::vector<AblationRow> out;
  out.reserve(n_rows);
  for (int r = 0; r < n_rows; ++r) {
    AblationRow row;
    row.name = rows[r].name;
    row.param_count = results[static_cast<size_t>(r) * n_seeds].params;
    double sum = 0.0;
    for (int s = 0; s < n_seeds; ++s) {
      const RunResult& rr = results[static_cast<size_t>(r) * n_seeds + s];
      row.per_seed_metric.push_back(rr.metric);
      row.per_seed_scene.push_back(rr.scene);
      sum += rr.metric;
    }
    row.mean = sum / n_seeds;
    double var = 0.0;
    for (double v : row.per_seed_metric) var += (v - row.mean) * (v - row.mean);
    row.stddev = n_seeds > 1 ? std::sqrt(var / (n_seeds - 1)) : 0.0;
    if (cfg.task == Task::scene_seg) {
      double recall = 0.0, far = 0.0;
      for (const auto& sm : row.per_seed_scene) {
        recall += sm.fg_recall;
        far += sm.recall_far;
      }
      row.fg_recall_mean = recall / n_seeds;
      row.far_recall_mean = far / n_seeds;
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::string ablation_table_tsv(const std::vector<AblationRow>& rows, const std::string& grid,
                               const std::vector<uint64_t>& seeds) {
  std::ostringstream out;
  const bool scene = grid == "dse";
  out << "row\t" << (scene ? "fg_iou_mean\tfg_iou_std" : "cls_miou_mean\tcls_miou_std");
  if (scene) out << "\tfg_recall_mean\tfar_recall_mean";
  out << "\tparams";
  for (uint64_t s : seeds) out << "\tseed_" << s;
  out << "\n";
  for (const AblationRow& r : rows) {
    out << r.name << "\t" << fmt(r.mean) << "\t" << fmt(r.stddev);
    if (scene) out << "\t" << fmt(r.fg_recall_mean) << "\t" << fmt(r.far_recall_mean);
    out << "\t" << r.param_count;
    for (double v : r.per_seed_metric) out << "\t" << fmt(v);
    out << "\n";
  }
  return out.str();
}

}  // namespace pointe
