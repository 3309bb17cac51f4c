#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pointe/data.hpp"
#include "pointe/encoder_config.hpp"
#include "pointe/model.hpp"
#include "pointe/task.hpp"
#include "pointe/train.hpp"

namespace pointe {

// Flat key-value run description (dotted keys, `#` comments). See
// docs/formats.md for the schema.
struct RunConfig {
  Task task = Task::classify;
  uint64_t seed = 1;
  std::string out_dir = ".";

  struct DatasetConfig {
    std::vector<ShapeKind> kinds = {ShapeKind::sphere, ShapeKind::cube, ShapeKind::cylinder,
                                    ShapeKind::plane};
    int n_train = 200;
    int n_test = 100;
    int n_points = 256;
    double noise_sigma = 0.02;
    uint64_t seed = 7;
    // overfit harness: evaluate on the training clouds themselves
    bool test_equals_train = false;
    // scene task
    int n_objects = 4;
    double near_dist = 2.0;
    double far_dist = 12.0;
    double ground_extent = 14.0;
    int points_per_object = 96;
    int ground_points = 256;
  } dataset;

  EncoderConfig encoder;
  TrainSchedule train;

  std::string ablate_grid = "geometry";  // "geometry" or "dse"
  std::vector<uint64_t> ablate_seeds = {1, 2, 3};

  // Total part classes of the configured kinds (labels are offset per
  // kind so mixed-kind datasets share one label space).
  int num_parts() const;
  int num_classes() const { return static_cast<int>(dataset.kinds.size()); }

  void validate() const;  // throws ConfigError
};

RunConfig default_run_config();

// Parses and validates; errors carry "origin:line:" prefixes.
RunConfig parse_run_config_text(const std::string& text, const std::string& origin);
RunConfig parse_run_config(const std::string& path);

// Generates the train/test splits described by the config. Object-level
// clouds are centered and unit-sphere scaled; scene clouds keep absolute
// coordinates.
Dataset build_dataset(const RunConfig& cfg);

ModelConfig model_config_from(const RunConfig& cfg);

}  // namespace pointe
