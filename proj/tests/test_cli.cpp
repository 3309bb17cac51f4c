#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace std;

namespace {

string cli_bin() {
  const char* env = getenv("POINTE_CLI_BIN");
  REQUIRE_MESSAGE(env != nullptr, "POINTE_CLI_BIN must point at the built binary");
  return env;
}

struct RunResult {
  int exit_code;
  string out;
  string err;
};

RunResult run_cli(const string& args) {
  static int counter = 0;
  const string out_path = "/tmp/pointe_cli_out_" + to_string(counter);
  const string err_path = "/tmp/pointe_cli_err_" + to_string(counter);
  ++counter;
  const string cmd = cli_bin() + " " + args + " >" + out_path + " 2>" + err_path;
  const int status = system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  auto slurp = [](const string& p) {
    ifstream in(p);
    stringstream ss;
    ss << in.rdbuf();
    remove(p.c_str());
    return ss.str();
  };
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  return r;
}

string write_config(const string& name, const string& body) {
  const string dir = "/tmp/pointe_cli_cfg";
  filesystem::create_directories(dir);
  const string path = dir + "/" + name;
  ofstream out(path);
  out << body;
  return path;
}

// overfit harness: the test split is the training data itself
const char* kTinyClassify = R"(
task = classify
dataset.kinds = sphere,cube
dataset.n_train = 8
dataset.n_test = 8
dataset.test_equals_train = true
dataset.n_points = 48
dataset.noise = 0.02
dataset.seed = 3
encoder.embed_dim = 6
encoder.stages = 24:6,12:6
train.epochs = 150
train.batch = 4
train.lr = 0.002
train.seed = 1
train.stop_at_metric = 1.0
)";

}  // namespace

TEST_CASE("a missing config file exits with the configuration code") {
  const auto r = run_cli("train --config /tmp/definitely_missing.cfg");
  CHECK(r.exit_code == 2);
}

TEST_CASE("a malformed config reports the offending line and exits 2") {
  const string cfg = write_config("broken.cfg", "task = classify\nwhat even is this\n");
  const auto r = run_cli("train --config " + cfg);
  CHECK(r.exit_code == 2);
  CHECK(r.err.find(":2:") != string::npos);
}

TEST_CASE("train writes a checkpoint and a log, eval reproduces the overfit accuracy") {
  const string cfg = write_config("tiny.cfg", kTinyClassify);
  const string out_dir = "/tmp/pointe_cli_run1";
  filesystem::remove_all(out_dir);

  const auto train1 = run_cli("train --config " + cfg + " --out " + out_dir);
  CHECK(train1.exit_code == 0);
  CHECK(filesystem::exists(out_dir + "/best.ckpt"));
  CHECK(filesystem::exists(out_dir + "/train_log.tsv"));

  // determinism: the same config and seed reproduce the log byte for byte
  const string out_dir2 = "/tmp/pointe_cli_run2";
  filesystem::remove_all(out_dir2);
  const auto train2 = run_cli("train --config " + cfg + " --out " + out_dir2);
  CHECK(train2.exit_code == 0);
  auto slurp_file = [](const string& p) {
    ifstream in(p);
    stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  CHECK(slurp_file(out_dir + "/train_log.tsv") == slurp_file(out_dir2 + "/train_log.tsv"));

  const auto eval = run_cli("eval --config " + cfg + " --checkpoint " + out_dir + "/best.ckpt");
  CHECK(eval.exit_code == 0);
  CHECK(eval.out.find("oa\t1.000000") != string::npos);

  // encode dumps per-point features for a saved cloud
  const string xyz = "/tmp/pointe_cli_cloud.xyz";
  {
    ofstream out(xyz);
    for (int i = 0; i < 48; ++i)
      out << 0.1 * (i % 7) << " " << 0.2 * (i % 5) << " " << 0.05 * i << "\n";
  }
  const auto enc = run_cli("encode " + xyz + " --checkpoint " + out_dir +
                           "/best.ckpt --out /tmp/pointe_cli_feats.tsv");
  CHECK(enc.exit_code == 0);
  ifstream feats("/tmp/pointe_cli_feats.tsv");
  string header;
  getline(feats, header);
  CHECK(header.substr(0, 5) == "x\ty\tz");
  int rows = 0;
  for (string line; getline(feats, line);) ++rows;
  CHECK(rows == 48);
}

TEST_CASE("eval rejects a checkpoint whose task does not match") {
  const string cfg = write_config("tiny2.cfg", kTinyClassify);
  const string out_dir = "/tmp/pointe_cli_run3";
  filesystem::remove_all(out_dir);
  const auto train = run_cli("train --config " + cfg + " --out " + out_dir);
  REQUIRE(train.exit_code == 0);

  const string seg_cfg = write_config("tiny_seg.cfg", R"(
task = segment
dataset.kinds = cylinder
dataset.n_train = 4
dataset.n_test = 2
dataset.n_points = 48
encoder.embed_dim = 6
encoder.stages = 24:6,12:6
train.epochs = 1
)");
  const auto r = run_cli("eval --config " + seg_cfg + " --checkpoint " + out_dir + "/best.ckpt");
  CHECK(r.exit_code == 3);
}

TEST_CASE("ablate runs the geometry grid and its table is deterministic") {
  const string cfg = write_config("ablate_tiny.cfg", R"(
task = segment
dataset.kinds = cylinder
dataset.n_train = 4
dataset.n_test = 2
dataset.n_points = 48
dataset.seed = 3
encoder.embed_dim = 4
encoder.stages = 24:5,12:5
train.epochs = 2
train.batch = 2
ablate.grid = geometry
ablate.seeds = 1
)");
  const string out_dir = "/tmp/pointe_cli_ablate";
  filesystem::remove_all(out_dir);
  const auto r1 = run_cli("ablate --config " + cfg + " --out " + out_dir);
  CHECK(r1.exit_code == 0);
  CHECK(filesystem::exists(out_dir + "/ablation.tsv"));

  // header plus the five grid rows
  int lines = 0;
  bool saw_maa = false, saw_concat = false;
  {
    ifstream in(out_dir + "/ablation.tsv");
    for (string line; getline(in, line);) {
      ++lines;
      if (line.rfind("all_maa\t", 0) == 0) saw_maa = true;
      if (line.rfind("all_concat\t", 0) == 0) saw_concat = true;
    }
  }
  CHECK(lines == 6);
  CHECK(saw_maa);
  CHECK(saw_concat);

  const auto r2 = run_cli("ablate --config " + cfg + " --out " + out_dir);
  CHECK(r2.exit_code == 0);
  CHECK(r1.out == r2.out);
}

TEST_CASE("gradcheck passes on the stock build and lists the primitive count") {
  const auto r = run_cli("gradcheck");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("17 primitives") != string::npos);
}

TEST_CASE("gradcheck flags an intentionally corrupted derivative and names it") {
  const auto r = run_cli("gradcheck --corrupt relu");
  CHECK(r.exit_code == 1);
  CHECK(r.err.find("relu") != string::npos);
}

TEST_CASE("info prints per-module counts that sum to a hand-checked total") {
  const string cfg = write_config("info.cfg", R"(
task = classify
dataset.kinds = sphere,cube
dataset.n_points = 32
encoder.embed_dim = 4
encoder.stages = 16:4
train.epochs = 1
)");
  const auto r = run_cli("info --config " + cfg);
  CHECK(r.exit_code == 0);
  // lift 3*4+4 = 16; three encoders at C=8: 3*(3*8+8 + 8*8+8) = 312;
  // scales/biases 3*2*8 = 48; head 8*4+4 + 4*2+2 = 46; total 422
  CHECK(r.out.find("total\t422") != string::npos);

  const string cfg_dse = write_config("info_dse.cfg", R"(
task = classify
dataset.kinds = sphere,cube
dataset.n_points = 32
encoder.embed_dim = 4
encoder.stages = 16:4
encoder.use_dse = true
train.epochs = 1
)");
  const auto r2 = run_cli("info --config " + cfg_dse);
  CHECK(r2.exit_code == 0);
  // decoder width W = 4 + 8 = 12 -> dse adds
  // seg: 12*12+12 + 12*6+6 + 6*3+3 + 3*1+1 = 156+78+21+4 = 259
  // dist: 2*8+8 + 8*2+2 = 24+18 = 42; delta 301
  CHECK(r2.out.find("dse\t301") != string::npos);
  CHECK(r2.out.find("total\t723") != string::npos);
}
