#pragma once

#include <string>
#include <vector>

#include "pointe/error.hpp"

namespace pointe {

enum class Aggregation { maa, concat };

// Hyperparameters of the hierarchical encoder. Channel width after the
// initial lift is embed_dim and doubles per stage.
struct EncoderConfig {
  struct Stage {
    int sample_count = 0;    // centers kept by farthest point sampling
    int neighbor_count = 0;  // k of the k-NN grouping
  };

  int embed_dim = 36;
  std::vector<Stage> stages;
  bool use_normal = true;
  bool use_curvature = true;
  Aggregation aggregation = Aggregation::maa;
  bool use_dse = false;

  // Channel width consumed by stage s (embed_dim * 2^s).
  int stage_in_width(int s) const { return embed_dim << s; }
  // Channel width produced by stage s.
  int stage_out_width(int s) const { return embed_dim << (s + 1); }
  int final_width() const { return embed_dim << static_cast<int>(stages.size()); }

  // Checks the structural invariants against an input cloud size.
  void validate(int n_points) const {
    if (embed_dim < 1) throw Error(ErrorCode::ConfigError, "embed_dim must be positive");
    if (stages.empty()) throw Error(ErrorCode::ConfigError, "at least one stage required");
    int prev = n_points;
    for (size_t s = 0; s < stages.size(); ++s) {
      const Stage& st = stages[s];
      const std::string tag = "stage " + std::to_string(s);
      if (st.sample_count < 1 || st.sample_count > prev)
        throw Error(ErrorCode::ConfigError,
                    tag + ": sample_count " + std::to_string(st.sample_count) +
                        " out of range for " + std::to_string(prev) + " input points");
      if (s > 0 && st.sample_count >= stages[s - 1].sample_count)
        throw Error(ErrorCode::ConfigError, tag + ": sample_counts must strictly decrease");
      if (st.neighbor_count < 3)
        throw Error(ErrorCode::ConfigError, tag + ": neighbor_count must be >= 3");
      if (st.neighbor_count > prev)
        throw Error(ErrorCode::ConfigError,
                    tag + ": neighbor_count exceeds available points");
      prev = st.sample_count;
    }
  }
};

}  // namespace pointe
