#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pointe/autodiff.hpp"
#include "pointe/data.hpp"
#include "pointe/dse.hpp"
#include "pointe/encoder_config.hpp"
#include "pointe/heads.hpp"
#include "pointe/mge.hpp"
#include "pointe/params.hpp"
#include "pointe/task.hpp"

namespace pointe {

struct ModelConfig {
  Task task = Task::classify;
  EncoderConfig encoder;
  int num_classes = 0;  // classify
  int n_parts = 0;      // segment
};

// Owns the parameter registry and wires encoder, decoder and task heads
// onto a tape for each forward pass.
class Model {
 public:
  Model(const ModelConfig& cfg, uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  ParamRegistry& params() { return reg_; }
  const ParamRegistry& params() const { return reg_; }

  // Width of the per-point features after propagating every stage back to
  // full resolution with skip connections.
  int decoder_width() const;

  // (module, learnable parameter count) pairs plus the grand total, for
  // reporting.
  std::vector<std::pair<std::string, long>> param_groups() const;

  struct Bound {
    // classification logits, 1 x num_classes
    ad::Var logits(const Matrix& points);
    // per-point part logits, N x n_parts
    ad::Var part_logits(const Matrix& points);
    // full-resolution decoder features, N x decoder_width()
    ad::Var point_features(const Matrix& points);

    struct SceneForward {
      ad::Var features;  // N x decoder_width()
      ad::Var fg_prob;   // N x 1
      ad::Var sem;       // N x decoder_width()/4
      ad::Var d;         // N x 1
    };
    SceneForward scene(const Matrix& points);

    // folds tape gradients back into the registry, scaled (e.g. 1/batch)
    void accumulate_grads(double scale = 1.0);

    Model* model = nullptr;
    ad::Tape* tape = nullptr;
    mge::EncoderVars enc;
    heads::ClassifierVars cls;
    ad::Var seg_w1, seg_b1, seg_w2, seg_b2;
    dse::DseVars dse_vars;

   private:
    friend class Model;
    std::vector<std::pair<Parameter*, ad::Var>> bound_;
  };

  // Binds every registry parameter as a tape leaf.
  Bound bind(ad::Tape& t, bool requires_grad);
  // Wires caller-provided leaves (registry order); used by gradient checks.
  Bound bind_with(ad::Tape& t, std::span<const ad::Var> leaves);

  // Replaces parameter values from a checkpoint; every name must match
  // exactly once with an identical shape.
  void load_values(const std::vector<Parameter>& values);

 private:
  void build_params(uint64_t seed);

  ModelConfig cfg_;
  ParamRegistry reg_;
};

CheckpointMeta checkpoint_meta(const Model& model, int epoch, uint64_t seed,
                               double best_metric);

}  // namespace pointe
