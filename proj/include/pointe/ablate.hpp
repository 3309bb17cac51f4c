#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "pointe/config.hpp"
#include "pointe/heads.hpp"

namespace pointe {

struct AblationRow {
  std::string name;
  long param_count = 0;
  std::vector<double> per_seed_metric;        // primary metric per seed
  double mean = 0.0;
  double stddev = 0.0;
  // scene grid only: per-seed scene metrics in seed order
  std::vector<heads::SceneMetrics> per_seed_scene;
  double fg_recall_mean = 0.0;
  double far_recall_mean = 0.0;
};

// Number of worker threads for grid runs: POINTE_THREADS when set, else
// hardware concurrency, never more than the job count.
int ablation_threads(int n_jobs);

// Runs the configured grid over cfg.ablate_seeds. "geometry" sweeps the
// branch/aggregation combinations on the segmentation task
// (spatial_only, spatial+normal, spatial+curvature, all_concat, all_maa);
// "dse" sweeps {baseline, mge, dse_wo_d, dse_w_d} on the scene task.
// The dataset is shared across rows; seeds drive parameter init and
// shuffling.
std::vector<AblationRow> run_ablation(const RunConfig& cfg, std::ostream* progress);

// Tab-separated table, one row per configuration, deterministic formatting.
std::string ablation_table_tsv(const std::vector<AblationRow>& rows, const std::string& grid,
                               const std::vector<uint64_t>& seeds);

}  // namespace pointe
