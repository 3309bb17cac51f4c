#pragma once

#include <cstdint>
#include <string>

#include "pointe/cloud.hpp"
#include "pointe/encoder_config.hpp"
#include "pointe/params.hpp"
#include "pointe/task.hpp"

namespace pointe {

enum class ShapeKind { sphere, cube, cylinder, plane };

const char* shape_kind_name(ShapeKind k);
ShapeKind shape_kind_from_name(const std::string& s);

// Number of part labels a kind produces: sphere 2 (hemispheres), cube 6
// (faces), cylinder 3 (side + caps), plane 2 (halves).
int shape_part_count(ShapeKind k);

struct ShapeSpec {
  ShapeKind kind = ShapeKind::sphere;
  int n_points = 256;
  double noise_sigma = 0.0;
  uint64_t seed = 0;
};

// Uniform surface samples of the canonical primitive (sphere radius 1,
// cube [-1,1]^3, cylinder radius 1 height 2, plane [-1,1]^2 at z=0) with
// optional Gaussian noise. Part labels come from the ideal surface point,
// before noise. Pure function of the spec.
PointCloud gen_shape(const ShapeSpec& spec);

struct SceneSpec {
  int n_objects = 4;
  double near_dist = 2.0;
  double far_dist = 12.0;
  double ground_extent = 14.0;
  int points_per_object = 96;
  int ground_points = 256;
  uint64_t seed = 0;
};

// Ground plane (background) plus small objects placed at distances in
// [near, far]. Point budget per object decays as 1/distance, clamped at 8.
// Labels and fg_mask mark foreground points. Pure function of the spec.
PointCloud gen_scene(const SceneSpec& spec);

// The 1/distance density law: round(points_per_object * near / dist),
// never below 8 points.
int scene_object_budget(int points_per_object, double near_dist, double dist);

// Text point format, one point per line: `x y z [label] [fg]`, `#`
// comments. Coordinates round-trip bit-exactly (shortest-representation
// printing).
PointCloud load_xyz(const std::string& path);
void save_xyz(const std::string& path, const PointCloud& pc);

inline constexpr int kCheckpointVersion = 1;

struct CheckpointMeta {
  int version = kCheckpointVersion;
  Task task = Task::classify;
  int num_classes = 0;
  int n_parts = 0;
  EncoderConfig encoder;
  int epoch = 0;
  uint64_t seed = 0;
  double best_metric = 0.0;
};

struct LoadedCheckpoint {
  CheckpointMeta meta;
  std::vector<Parameter> params;
};

// Single-file container: text header (version, config echo, parameter
// manifest) followed by little-endian 64-bit floats in manifest order.
void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const std::vector<Parameter>& params);
LoadedCheckpoint load_checkpoint(const std::string& path);

// Encoder stage serialization used by checkpoints and config files:
// "M:k,M:k,...".
std::string stages_to_string(const EncoderConfig& cfg);
void parse_stages(const std::string& text, EncoderConfig& cfg);

}  // namespace pointe
