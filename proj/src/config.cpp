#include "pointe/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace pointe {

int RunConfig::num_parts() const {
  int n = 0;
  for (ShapeKind k : dataset.kinds) n += shape_part_count(k);
  return n;
}

void RunConfig::validate() const {
  if (train.epochs < 1) throw Error(ErrorCode::ConfigError, "train.epochs must be >= 1");
  if (train.batch < 1) throw Error(ErrorCode::ConfigError, "train.batch must be >= 1");
  if (train.lr <= 0) throw Error(ErrorCode::ConfigError, "train.lr must be positive");
  if (dataset.n_train < 1) throw Error(ErrorCode::ConfigError, "dataset.n_train must be >= 1");
  if (dataset.n_test < 1) throw Error(ErrorCode::ConfigError, "dataset.n_test must be >= 1");
  if (task == Task::scene_seg) {
    if (!encoder.use_dse)
      throw Error(ErrorCode::ConfigError, "scene_seg requires encoder.use_dse = true");
    if (dataset.n_objects < 1)
      throw Error(ErrorCode::ConfigError, "scene_seg needs dataset.n_objects >= 1");
    // every possible scene size must satisfy the encoder invariants
    const int min_points = dataset.ground_points + dataset.n_objects * 8;
    encoder.validate(min_points);
  } else {
    if (dataset.kinds.empty()) throw Error(ErrorCode::ConfigError, "dataset.kinds is empty");
    if (dataset.n_points < 8)
      throw Error(ErrorCode::ConfigError, "dataset.n_points must be >= 8");
    encoder.validate(dataset.n_points);
  }
}

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.encoder.stages = {{128, 12}, {64, 12}, {32, 12}};
  return cfg;
}

namespace {

struct KeyValue {
  std::string key, value;
  int line;
};

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
  throw Error(ErrorCode::ConfigError, origin + ":" + std::to_string(line) + ": " + msg);
}

long to_long(const KeyValue& kv, const std::string& origin) {
  try {
    size_t pos = 0;
    long v = std::stol(kv.value, &pos);
    if (pos != kv.value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    fail(origin, kv.line, "expected integer for " + kv.key + ", got '" + kv.value + "'");
  }
}

double to_double(const KeyValue& kv, const std::string& origin) {
  try {
    size_t pos = 0;
    double v = std::stod(kv.value, &pos);
    if (pos != kv.value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    fail(origin, kv.line, "expected number for " + kv.key + ", got '" + kv.value + "'");
  }
}

bool to_bool(const KeyValue& kv, const std::string& origin) {
  if (kv.value == "true" || kv.value == "1") return true;
  if (kv.value == "false" || kv.value == "0") return false;
  fail(origin, kv.line, "expected true/false for " + kv.key + ", got '" + kv.value + "'");
}

}  // namespace

RunConfig parse_run_config_text(const std::string& text, const std::string& origin) {
  std::vector<KeyValue> entries;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) fail(origin, lineno, "expected 'key = value'");
    KeyValue kv{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), lineno};
    if (kv.key.empty()) fail(origin, lineno, "empty key");
    entries.push_back(std::move(kv));
  }

  RunConfig cfg = default_run_config();
  for (const KeyValue& kv : entries) {
    const std::string& k = kv.key;
    try {
      if (k == "task") cfg.task = task_from_name(kv.value);
      else if (k == "seed") cfg.seed = static_cast<uint64_t>(to_long(kv, origin));
      else if (k == "out") cfg.out_dir = kv.value;
      else if (k == "dataset.kinds") {
        cfg.dataset.kinds.clear();
        std::istringstream ks(kv.value);
        std::string item;
        while (std::getline(ks, item, ','))
          cfg.dataset.kinds.push_back(shape_kind_from_name(trim(item)));
      } else if (k == "dataset.n_train") cfg.dataset.n_train = static_cast<int>(to_long(kv, origin));
      else if (k == "dataset.n_test") cfg.dataset.n_test = static_cast<int>(to_long(kv, origin));
      else if (k == "dataset.n_points") cfg.dataset.n_points = static_cast<int>(to_long(kv, origin));
      else if (k == "dataset.noise") cfg.dataset.noise_sigma = to_double(kv, origin);
      else if (k == "dataset.seed") cfg.dataset.seed = static_cast<uint64_t>(to_long(kv, origin));
      else if (k == "dataset.test_equals_train")
        cfg.dataset.test_equals_train = to_bool(kv, origin);
      else if (k == "dataset.n_objects") cfg.dataset.n_objects = static_cast<int>(to_long(kv, origin));
      else if (k == "dataset.near") cfg.dataset.near_dist = to_double(kv, origin);
      else if (k == "dataset.far") cfg.dataset.far_dist = to_double(kv, origin);
      else if (k == "dataset.ground_extent") cfg.dataset.ground_extent = to_double(kv, origin);
      else if (k == "dataset.points_per_object")
        cfg.dataset.points_per_object = static_cast<int>(to_long(kv, origin));
      else if (k == "dataset.ground_points")
        cfg.dataset.ground_points = static_cast<int>(to_long(kv, origin));
      else if (k == "encoder.embed_dim") cfg.encoder.embed_dim = static_cast<int>(to_long(kv, origin));
      else if (k == "encoder.stages") parse_stages(kv.value, cfg.encoder);
      else if (k == "encoder.use_normal") cfg.encoder.use_normal = to_bool(kv, origin);
      else if (k == "encoder.use_curvature") cfg.encoder.use_curvature = to_bool(kv, origin);
      else if (k == "encoder.aggregation") {
        if (kv.value == "maa") cfg.encoder.aggregation = Aggregation::maa;
        else if (kv.value == "concat") cfg.encoder.aggregation = Aggregation::concat;
        else fail(origin, kv.line, "aggregation must be maa or concat");
      } else if (k == "encoder.use_dse") cfg.encoder.use_dse = to_bool(kv, origin);
      else if (k == "train.epochs") cfg.train.epochs = static_cast<int>(to_long(kv, origin));
      else if (k == "train.batch") cfg.train.batch = static_cast<int>(to_long(kv, origin));
      else if (k == "train.lr") cfg.train.lr = to_double(kv, origin);
      else if (k == "train.seed") cfg.train.seed = static_cast<uint64_t>(to_long(kv, origin));
      else if (k == "train.stop_at_metric") cfg.train.stop_at_metric = to_double(kv, origin);
      else if (k == "train.lambda_seg") cfg.train.lambda_seg = to_double(kv, origin);
      else if (k == "train.jitter") cfg.train.jitter = to_double(kv, origin);
      else if (k == "train.scene_loss") cfg.train.scene_loss = seg_loss_from_name(kv.value);
      else if (k == "ablate.grid") {
        if (kv.value != "geometry" && kv.value != "dse")
          fail(origin, kv.line, "ablate.grid must be geometry or dse");
        cfg.ablate_grid = kv.value;
      } else if (k == "ablate.seeds") {
        cfg.ablate_seeds.clear();
        std::istringstream ss(kv.value);
        std::string item;
        while (std::getline(ss, item, ','))
          cfg.ablate_seeds.push_back(static_cast<uint64_t>(std::stol(trim(item))));
        if (cfg.ablate_seeds.empty()) fail(origin, kv.line, "ablate.seeds is empty");
      } else {
        fail(origin, kv.line, "unknown key '" + k + "'");
      }
    } catch (const Error& e) {
      if (e.code == ErrorCode::ConfigError &&
          std::string(e.what()).find(origin + ":") != std::string::npos)
        throw;  // already line-anchored
      fail(origin, kv.line, e.what());
    }
  }

  try {
    cfg.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, origin + ": " + e.what());
  }
  return cfg;
}

RunConfig parse_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config_text(buf.str(), path);
}

Dataset build_dataset(const RunConfig& cfg) {
  cfg.validate();
  Dataset ds;
  ds.task = cfg.task;
  Rng master(cfg.dataset.seed);

  if (cfg.task == Task::scene_seg) {
    ds.n_classes = 2;
    const int total = cfg.dataset.n_train + cfg.dataset.n_test;
    for (int i = 0; i < total; ++i) {
      SceneSpec spec;
      spec.n_objects = cfg.dataset.n_objects;
      spec.near_dist = cfg.dataset.near_dist;
      spec.far_dist = cfg.dataset.far_dist;
      spec.ground_extent = cfg.dataset.ground_extent;
      spec.points_per_object = cfg.dataset.points_per_object;
      spec.ground_points = cfg.dataset.ground_points;
      spec.seed = master.next_u64();
      PointCloud pc = gen_scene(spec);
      (i < cfg.dataset.n_train ? ds.train : ds.test).push_back(std::move(pc));
    }
    if (cfg.dataset.test_equals_train) ds.test = ds.train;
    return ds;
  }

  const auto& kinds = cfg.dataset.kinds;
  ds.n_classes = static_cast<int>(kinds.size());
  ds.n_parts = cfg.num_parts();
  std::vector<int> part_offset(kinds.size(), 0);
  for (size_t i = 1; i < kinds.size(); ++i)
    part_offset[i] = part_offset[i - 1] + shape_part_count(kinds[i - 1]);

  const int total = cfg.dataset.n_train + cfg.dataset.n_test;
  for (int i = 0; i < total; ++i) {
    const int ki = i % static_cast<int>(kinds.size());
    ShapeSpec spec;
    spec.kind = kinds[ki];
    spec.n_points = cfg.dataset.n_points;
    spec.noise_sigma = cfg.dataset.noise_sigma;
    spec.seed = master.next_u64();
    PointCloud pc = center_and_scale(gen_shape(spec));
    if (cfg.task == Task::segment) {
      for (int& l : pc.labels) l += part_offset[ki];
    }
    const bool is_train = i < cfg.dataset.n_train;
    (is_train ? ds.train : ds.test).push_back(std::move(pc));
    (is_train ? ds.train_class : ds.test_class).push_back(ki);
  }
  if (cfg.dataset.test_equals_train) {
    ds.test = ds.train;
    ds.test_class = ds.train_class;
  }
  return ds;
}

ModelConfig model_config_from(const RunConfig& cfg) {
  ModelConfig mc;
  mc.task = cfg.task;
  mc.encoder = cfg.encoder;
  mc.num_classes = cfg.num_classes();
  mc.n_parts = cfg.num_parts();
  return mc;
}

}  // namespace pointe
