#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pointe/ablate.hpp"
#include "pointe/config.hpp"
#include "pointe/gradcheck_suite.hpp"
#include "pointe/model.hpp"
#include "pointe/train.hpp"

namespace {

using namespace pointe;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitCheckpoint = 3;

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

int exit_code_for(const Error& e) {
  switch (e.code) {
    case ErrorCode::ConfigError:
      return kExitConfig;
    case ErrorCode::VersionMismatch:
      return kExitCheckpoint;
    default:
      return kExitRuntime;
  }
}

RunConfig load_config(const std::string& path, uint64_t seed_override, bool seed_set,
                      const std::string& out_override) {
  RunConfig cfg = parse_run_config(path);
  if (seed_set) {
    cfg.seed = seed_override;
    cfg.train.seed = seed_override;
  }
  if (!out_override.empty()) cfg.out_dir = out_override;
  return cfg;
}

int cmd_train(const std::string& config_path, uint64_t seed, bool seed_set,
              const std::string& out_override) {
  const RunConfig cfg = load_config(config_path, seed, seed_set, out_override);
  std::filesystem::create_directories(cfg.out_dir);

  const Dataset data = build_dataset(cfg);
  Model model(model_config_from(cfg), cfg.train.seed);

  std::ofstream log_file(cfg.out_dir + "/train_log.tsv");
  if (!log_file) throw Error(ErrorCode::IoError, "cannot write " + cfg.out_dir);

  struct Tee : std::ostream, std::streambuf {
    std::ostream &a, &b;
    Tee(std::ostream& a_, std::ostream& b_) : std::ostream(this), a(a_), b(b_) {}
    int overflow(int c) override {
      if (c != EOF) {
        a.put(static_cast<char>(c));
        b.put(static_cast<char>(c));
      }
      return c;
    }
  } tee(std::cout, log_file);

  TrainReport report = train_model(model, data, cfg.train, &tee);

  const std::string ckpt = cfg.out_dir + "/best.ckpt";
  save_checkpoint(ckpt, checkpoint_meta(model, report.best_epoch, cfg.train.seed,
                                        report.best_metric),
                  report.best_params);
  std::cout << "# best " << report.metric_name << " " << fmt(report.best_metric)
            << " at epoch " << report.best_epoch << "\n# checkpoint " << ckpt << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& config_path, const std::string& checkpoint_path) {
  const LoadedCheckpoint ck = load_checkpoint(checkpoint_path);
  const RunConfig cfg = parse_run_config(config_path);
  if (cfg.task != ck.meta.task) {
    std::cerr << "checkpoint task " << task_name(ck.meta.task)
              << " does not match config task " << task_name(cfg.task) << "\n";
    return kExitCheckpoint;
  }

  ModelConfig mc;
  mc.task = ck.meta.task;
  mc.encoder = ck.meta.encoder;
  mc.num_classes = ck.meta.num_classes;
  mc.n_parts = ck.meta.n_parts;
  Model model(mc, 0);
  try {
    model.load_values(ck.params);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kExitCheckpoint;
  }

  const Dataset data = build_dataset(cfg);
  std::cout << "metric\tvalue\n";
  switch (cfg.task) {
    case Task::classify: {
      const auto m = evaluate_classification(model, data.test, data.test_class);
      std::cout << "oa\t" << fmt(m.oa) << "\nmacc\t" << fmt(m.macc) << "\n";
      break;
    }
    case Task::segment: {
      const auto m = evaluate_segmentation(model, data.test);
      std::cout << "cls_miou\t" << fmt(m.cls_miou) << "\ninst_miou\t" << fmt(m.inst_miou)
                << "\noa\t" << fmt(m.oa) << "\n";
      break;
    }
    case Task::scene_seg: {
      const auto m = evaluate_scene(model, data.test);
      std::cout << "fg_iou\t" << fmt(m.fg_iou) << "\nfg_recall\t" << fmt(m.fg_recall)
                << "\nrecall_near\t" << fmt(m.recall_near) << "\nrecall_mid\t"
                << fmt(m.recall_mid) << "\nrecall_far\t" << fmt(m.recall_far) << "\n";
      break;
    }
  }
  return kExitOk;
}

int cmd_encode(const std::string& input_path, const std::string& checkpoint_path,
               const std::string& out_path) {
  const LoadedCheckpoint ck = load_checkpoint(checkpoint_path);
  ModelConfig mc;
  mc.task = ck.meta.task;
  mc.encoder = ck.meta.encoder;
  mc.num_classes = ck.meta.num_classes;
  mc.n_parts = ck.meta.n_parts;
  Model model(mc, 0);
  model.load_values(ck.params);

  PointCloud cloud = load_xyz(input_path);
  if (ck.meta.task != Task::scene_seg) cloud = center_and_scale(cloud);

  ad::Tape tape;
  Model::Bound bound = model.bind(tape, false);
  Matrix feats;
  if (mc.encoder.use_dse) {
    auto fwd = bound.scene(cloud.points);
    feats = dse::dse_enhance(tape, fwd.features, fwd.sem).value();
  } else {
    feats = bound.point_features(cloud.points).value();
  }

  std::ofstream out(out_path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + out_path);
  out << "x\ty\tz";
  for (int c = 0; c < feats.cols; ++c) out << "\tf" << c;
  out << "\n";
  for (int i = 0; i < cloud.size(); ++i) {
    out << fmt(cloud.points.at(i, 0)) << "\t" << fmt(cloud.points.at(i, 1)) << "\t"
        << fmt(cloud.points.at(i, 2));
    for (int c = 0; c < feats.cols; ++c) out << "\t" << fmt(feats.at(i, c));
    out << "\n";
  }
  std::cout << "# wrote " << cloud.size() << " rows x " << feats.cols << " features to "
            << out_path << "\n";
  return kExitOk;
}

int cmd_ablate(const std::string& config_path, uint64_t seed, bool seed_set,
               const std::string& out_override) {
  const RunConfig cfg = load_config(config_path, seed, seed_set, out_override);
  const auto rows = run_ablation(cfg, &std::cerr);
  const std::string table = ablation_table_tsv(rows, cfg.ablate_grid, cfg.ablate_seeds);
  std::cout << table;
  std::filesystem::create_directories(cfg.out_dir);
  std::ofstream out(cfg.out_dir + "/ablation.tsv");
  out << table;
  return kExitOk;
}

int cmd_gradcheck(const std::string& corrupt_op) {
  const auto entries = run_gradcheck_suite(corrupt_op);
  int primitives = 0;
  bool ok = true;
  std::cout << "check\tkind\tmax_rel_err\ttol\tstatus\n";
  for (const auto& e : entries) {
    if (e.primitive) primitives++;
    if (!e.passed) ok = false;
    char err[32];
    std::snprintf(err, sizeof(err), "%.3e", e.max_rel_error);
    std::cout << e.name << "\t" << (e.primitive ? "primitive" : "composite") << "\t" << err
              << "\t" << e.tol << "\t" << (e.passed ? "ok" : "FAIL") << "\n";
  }
  std::cout << "# " << primitives << " primitives, " << entries.size() - primitives
            << " composites\n";
  if (!ok) {
    for (const auto& e : entries)
      if (!e.passed)
        std::cerr << "gradient check failed for " << e.name << " (max rel err "
                  << e.max_rel_error << ")\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_info(const std::string& config_path) {
  const RunConfig cfg = parse_run_config(config_path);
  Model model(model_config_from(cfg), cfg.train.seed);
  std::cout << "module\tparams\n";
  long total = 0;
  for (const auto& [group, count] : model.param_groups()) {
    std::cout << group << "\t" << count << "\n";
    total += count;
  }
  std::cout << "total\t" << total << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"point cloud encoder/segmenter with geometric feature aggregation"};
  app.require_subcommand(1);

  std::string config_path, checkpoint_path, out_path, input_path, corrupt_op;
  uint64_t seed = 0;
  bool seed_set = false;

  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "override config seed")->each([&](const std::string&) {
      seed_set = true;
    });
  };

  CLI::App* train = app.add_subcommand("train", "train a model from a config file");
  train->add_option("--config", config_path, "config file")->required();
  train->add_option("--out", out_path, "output directory override");
  add_seed(train);

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a config's test split");
  eval->add_option("--config", config_path, "config file")->required();
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();

  CLI::App* encode = app.add_subcommand("encode", "dump per-point features for a cloud");
  encode->add_option("input", input_path, "input .xyz file")->required();
  encode->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  encode->add_option("--out", out_path, "output tsv path")->required();

  CLI::App* ablate = app.add_subcommand("ablate", "run the configured ablation grid");
  ablate->add_option("--config", config_path, "config file")->required();
  ablate->add_option("--out", out_path, "output directory override");
  add_seed(ablate);

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  gradcheck->add_option("--corrupt", corrupt_op,
                        "perturb the named check (harness self-test)");

  CLI::App* info = app.add_subcommand("info", "parameter accounting for a config");
  info->add_option("--config", config_path, "config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? kExitConfig : kExitOk;
  }

  try {
    if (train->parsed()) return cmd_train(config_path, seed, seed_set, out_path);
    if (eval->parsed()) return cmd_eval(config_path, checkpoint_path);
    if (encode->parsed()) return cmd_encode(input_path, checkpoint_path, out_path);
    if (ablate->parsed()) return cmd_ablate(config_path, seed, seed_set, out_path);
    if (gradcheck->parsed()) return cmd_gradcheck(corrupt_op);
    if (info->parsed()) return cmd_info(config_path);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}
