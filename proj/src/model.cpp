#include "pointe/model.hpp"

#include <algorithm>
#include <map>

namespace pointe {

namespace {

Matrix uniform_init(int rows, int cols, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Matrix m(rows, cols);
  for (double& v : m.data) v = rng.uniform(-bound, bound);
  return m;
}

}  // namespace

Model::Model(const ModelConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
  if (cfg_.task == Task::classify && cfg_.num_classes < 2)
    throw Error(ErrorCode::ConfigError, "classification needs num_classes >= 2");
  if (cfg_.task == Task::segment && cfg_.n_parts < 2)
    throw Error(ErrorCode::ConfigError, "segmentation needs n_parts >= 2");
  if (cfg_.task == Task::scene_seg && !cfg_.encoder.use_dse)
    throw Error(ErrorCode::ConfigError, "scene_seg requires encoder.use_dse");
  if (cfg_.encoder.stages.empty())
    throw Error(ErrorCode::ConfigError, "encoder needs at least one stage");
  build_params(init_seed);
}

int Model::decoder_width() const {
  int w = cfg_.encoder.embed_dim;
  for (size_t s = 0; s < cfg_.encoder.stages.size(); ++s)
    w += cfg_.encoder.stage_out_width(static_cast<int>(s));
  return w;
}

void Model::build_params(uint64_t seed) {
  Rng rng(seed);
  const EncoderConfig& ec = cfg_.encoder;
  const int d0 = ec.embed_dim;

  auto add_affine = [&](const std::string& prefix, int in, int out) {
    reg_.add(prefix + ".w", uniform_init(in, out, in, rng));
    reg_.add(prefix + ".b", uniform_init(1, out, in, rng));
  };
  auto add_pos_encoder = [&](const std::string& prefix, int in, int out) {
    // hidden width equals the output width
    reg_.add(prefix + ".w1", uniform_init(in, out, in, rng));
    reg_.add(prefix + ".b1", uniform_init(1, out, in, rng));
    reg_.add(prefix + ".w2", uniform_init(out, out, out, rng));
    reg_.add(prefix + ".b2", uniform_init(1, out, out, rng));
  };

  add_affine("mge.lift", 3, d0);

  for (size_t s = 0; s < ec.stages.size(); ++s) {
    const std::string sp = "mge.stage" + std::to_string(s);
    const int c = ec.stage_out_width(static_cast<int>(s));
    add_pos_encoder(sp + ".pose_s", 3, c);
    if (ec.use_normal) add_pos_encoder(sp + ".pose_n", 3, c);
    if (ec.use_curvature) add_pos_encoder(sp + ".pose_c", 3, c);

    if (ec.aggregation == Aggregation::maa) {
      auto add_maa = [&](const std::string& branch) {
        reg_.add(sp + ".maa." + branch + ".alpha", Matrix::filled(1, c, 1.0));
        reg_.add(sp + ".maa." + branch + ".beta", Matrix::zeros(1, c));
      };
      add_maa("s");
      if (ec.use_normal) add_maa("n");
      if (ec.use_curvature) add_maa("c");
    } else {
      const int branches = 1 + (ec.use_normal ? 1 : 0) + (ec.use_curvature ? 1 : 0);
      add_affine(sp + ".concat", branches * c, c);
    }
  }

  if (cfg_.task == Task::classify) {
    const int cf = ec.final_width();
    const int hidden = std::max(1, cf / 2);
    add_affine("head.cls.l1", cf, hidden);
    add_affine("head.cls.l2", hidden, cfg_.num_classes);
  }
  if (cfg_.task == Task::segment) {
    const int w = decoder_width();
    const int hidden = std::max(1, w / 2);
    add_affine("head.seg.l1", w, hidden);
    add_affine("head.seg.l2", hidden, cfg_.n_parts);
  }
  if (ec.use_dse) {
    const int w = decoder_width();
    const int w2 = std::max(1, w / 2);
    const int w4 = std::max(1, w / 4);
    add_affine("dse.seg.l1", w, w);
    add_affine("dse.seg.l2", w, w2);
    add_affine("dse.seg.l3", w2, w4);
    add_affine("dse.seg.l4", w4, 1);
    add_affine("dse.dist.l1", 2, 8);
    // the distance branch sees raw |x|,|y| magnitudes; zero-initializing
    // its output layer starts the softmax neutral (d = 0.5 everywhere)
    // instead of saturated on far points, while the first layer stays live
    reg_.add("dse.dist.l2.w", Matrix::zeros(8, 2));
    reg_.add("dse.dist.l2.b", Matrix::zeros(1, 2));
  }
}

std::vector<std::pair<std::string, long>> Model::param_groups() const {
  std::map<std::string, long> groups;
  for (const Parameter& p : reg_.all()) {
    const size_t dot = p.name.find('.');
    groups[p.name.substr(0, dot)] += p.value.count();
  }
  std::vector<std::pair<std::string, long>> out(groups.begin(), groups.end());
  return out;
}

Model::Bound Model::bind(ad::Tape& t, bool requires_grad) {
  std::vector<ad::Var> leaves;
  leaves.reserve(reg_.all().size());
  for (Parameter& p : reg_.all()) leaves.push_back(t.leaf(p.value, requires_grad));
  Bound b = bind_with(t, leaves);
  if (requires_grad) {
    b.bound_.reserve(leaves.size());
    for (size_t i = 0; i < leaves.size(); ++i)
      b.bound_.emplace_back(&reg_.all()[i], leaves[i]);
  }
  return b;
}

Model::Bound Model::bind_with(ad::Tape& t, std::span<const ad::Var> leaves) {
  if (leaves.size() != reg_.all().size())
    throw Error(ErrorCode::ShapeMismatch, "leaf count does not match registry");
  std::map<std::string, ad::Var> by_name;
  for (size_t i = 0; i < leaves.size(); ++i) {
    require_same_shape(leaves[i].value(), reg_.all()[i].value, "bind_with");
    by_name[reg_.all()[i].name] = leaves[i];
  }
  auto var = [&](const std::string& name) {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw Error(ErrorCode::IndexOutOfRange, "unbound parameter " + name);
    return it->second;
  };

  Bound b;
  b.model = this;
  b.tape = &t;
  const EncoderConfig& ec = cfg_.encoder;
  b.enc.lift_w = var("mge.lift.w");
  b.enc.lift_b = var("mge.lift.b");
  b.enc.stages.resize(ec.stages.size());
  for (size_t s = 0; s < ec.stages.size(); ++s) {
    const std::string sp = "mge.stage" + std::to_string(s);
    mge::StageVars& sv = b.enc.stages[s];
    auto bind_pose = [&](mge::PosEncoderVars& pv, const std::string& prefix) {
      pv.w1 = var(prefix + ".w1");
      pv.b1 = var(prefix + ".b1");
      pv.w2 = var(prefix + ".w2");
      pv.b2 = var(prefix + ".b2");
    };
    bind_pose(sv.pose_spatial, sp + ".pose_s");
    if (ec.use_normal) bind_pose(sv.pose_normal, sp + ".pose_n");
    if (ec.use_curvature) bind_pose(sv.pose_curvature, sp + ".pose_c");
    if (ec.aggregation == Aggregation::maa) {
      sv.maa_spatial = {var(sp + ".maa.s.alpha"), var(sp + ".maa.s.beta")};
      if (ec.use_normal) sv.maa_normal = {var(sp + ".maa.n.alpha"), var(sp + ".maa.n.beta")};
      if (ec.use_curvature)
        sv.maa_curvature = {var(sp + ".maa.c.alpha"), var(sp + ".maa.c.beta")};
    } else {
      sv.concat_w = var(sp + ".concat.w");
      sv.concat_b = var(sp + ".concat.b");
    }
  }
  if (cfg_.task == Task::classify) {
    b.cls.w1 = var("head.cls.l1.w");
    b.cls.b1 = var("head.cls.l1.b");
    b.cls.w2 = var("head.cls.l2.w");
    b.cls.b2 = var("head.cls.l2.b");
  }
  if (cfg_.task == Task::segment) {
    b.seg_w1 = var("head.seg.l1.w");
    b.seg_b1 = var("head.seg.l1.b");
    b.seg_w2 = var("head.seg.l2.w");
    b.seg_b2 = var("head.seg.l2.b");
  }
  if (ec.use_dse) {
    b.dse_vars.seg_w1 = var("dse.seg.l1.w");
    b.dse_vars.seg_b1 = var("dse.seg.l1.b");
    b.dse_vars.seg_w2 = var("dse.seg.l2.w");
    b.dse_vars.seg_b2 = var("dse.seg.l2.b");
    b.dse_vars.seg_w3 = var("dse.seg.l3.w");
    b.dse_vars.seg_b3 = var("dse.seg.l3.b");
    b.dse_vars.seg_w4 = var("dse.seg.l4.w");
    b.dse_vars.seg_b4 = var("dse.seg.l4.b");
    b.dse_vars.dist_w1 = var("dse.dist.l1.w");
    b.dse_vars.dist_b1 = var("dse.dist.l1.b");
    b.dse_vars.dist_w2 = var("dse.dist.l2.w");
    b.dse_vars.dist_b2 = var("dse.dist.l2.b");
  }
  return b;
}

ad::Var Model::Bound::logits(const Matrix& points) {
  if (model->config().task != Task::classify)
    throw Error(ErrorCode::ConfigError, "model has no classification head");
  mge::EncodeResult res = mge::mge_encode(*tape, points, model->config().encoder, enc);
  return heads::classify(*tape, res.stages.back().features, cls);
}

ad::Var Model::Bound::point_features(const Matrix& points) {
  ad::Tape& t = *tape;
  mge::EncodeResult res = mge::mge_encode(t, points, model->config().encoder, enc);
  const int n_stages = static_cast<int>(res.stages.size());
  ad::Var g = res.stages.back().features;
  Matrix coarse_centers = res.stages.back().centers;
  for (int lvl = n_stages - 2; lvl >= 0; --lvl) {
    mge::StageOutput coarse{coarse_centers, g};
    g = heads::feature_propagate(t, coarse, res.stages[lvl].centers,
                                 res.stages[lvl].features);
    coarse_centers = res.stages[lvl].centers;
  }
  mge::StageOutput coarse{coarse_centers, g};
  return heads::feature_propagate(t, coarse, points, res.lift_features);
}

ad::Var Model::Bound::part_logits(const Matrix& points) {
  if (model->config().task != Task::segment)
    throw Error(ErrorCode::ConfigError, "model has no segmentation head");
  ad::Tape& t = *tape;
  ad::Var feats = point_features(points);
  const int n = feats.rows();
  ad::Var h = t.relu(t.add(t.matmul(feats, seg_w1), t.broadcast_row(seg_b1, n)));
  return t.add(t.matmul(h, seg_w2), t.broadcast_row(seg_b2, n));
}

Model::Bound::SceneForward Model::Bound::scene(const Matrix& points) {
  if (!model->config().encoder.use_dse)
    throw Error(ErrorCode::ConfigError, "model was built without the DSE branch");
  SceneForward out;
  out.features = point_features(points);
  dse::SemanticOut sem = dse::semantic_branch(*tape, dse_vars, out.features);
  out.fg_prob = sem.fg_prob;
  out.sem = sem.sem_features;
  out.d = dse::distance_factor(*tape, dse_vars, points);
  return out;
}

void Model::Bound::accumulate_grads(double scale) {
  for (auto& [param, var] : bound_) {
    const Matrix& g = var.grad();
    add_scaled(param->grad, g, scale);
  }
}

void Model::load_values(const std::vector<Parameter>& values) {
  std::map<std::string, const Parameter*> by_name;
  for (const Parameter& p : values) {
    if (!by_name.emplace(p.name, &p).second)
      throw Error(ErrorCode::ShapeMismatch, "duplicate checkpoint parameter " + p.name);
  }
  for (Parameter& p : reg_.all()) {
    auto it = by_name.find(p.name);
    if (it == by_name.end())
      throw Error(ErrorCode::ShapeMismatch, "checkpoint missing parameter " + p.name);
    if (!p.value.same_shape(it->second->value))
      throw Error(ErrorCode::ShapeMismatch,
                  p.name + ": checkpoint shape " + it->second->value.shape_str() +
                      ", model expects " + p.value.shape_str());
    p.value = it->second->value;
    by_name.erase(it);
  }
  if (!by_name.empty())
    throw Error(ErrorCode::ShapeMismatch,
                "checkpoint has unknown parameter " + by_name.begin()->first);
}

CheckpointMeta checkpoint_meta(const Model& model, int epoch, uint64_t seed,
                               double best_metric) {
  CheckpointMeta meta;
  meta.task = model.config().task;
  meta.num_classes = model.config().num_classes;
  meta.n_parts = model.config().n_parts;
  meta.encoder = model.config().encoder;
  meta.epoch = epoch;
  meta.seed = seed;
  meta.best_metric = best_metric;
  return meta;
}

}  // namespace pointe
