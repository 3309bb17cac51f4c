#include "pointe/gradcheck_suite.hpp"

#include <cmath>
#include <functional>
#include <memory>

#include "pointe/autodiff.hpp"
#include "pointe/config.hpp"
#include "pointe/dse.hpp"
#include "pointe/heads.hpp"
#include "pointe/mge.hpp"
#include "pointe/model.hpp"
#include "pointe/rng.hpp"

namespace pointe {

namespace {

using ad::Tape;
using ad::TensorFn;
using ad::Var;

Matrix random_matrix(Rng& rng, int r, int c, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (double& v : m.data) v = rng.uniform(lo, hi);
  return m;
}

// random values bounded away from zero (relu kink)
Matrix random_off_kink(Rng& rng, int r, int c) {
  Matrix m(r, c);
  for (double& v : m.data) {
    const double mag = rng.uniform(0.2, 1.0);
    v = rng.uniform() < 0.5 ? -mag : mag;
  }
  return m;
}

// random values whose column-wise maxima are unique by a clear margin
Matrix random_max_safe(Rng& rng, int r, int c) {
  Matrix m = random_matrix(rng, r, c);
  for (int col = 0; col < c; ++col) {
    int best = 0;
    for (int row = 1; row < r; ++row)
      if (m.at(row, col) > m.at(best, col)) best = row;
    m.at(best, col) += 0.5;
  }
  return m;
}

TensorFn maybe_corrupt(TensorFn fn, bool corrupt) {
  if (!corrupt) return fn;
  return [fn = std::move(fn)](Tape& t, std::span<const Var> xs) {
    Var orig = fn(t, xs);
    // value depends on the input but the tape sees only a constant, so the
    // analytic gradient misses this term
    Var ghost = t.sum_reduce(t.constant(xs[0].value()));
    return t.add(orig, t.scalar_mul(ghost, 0.01));
  };
}

struct Check {
  std::string name;
  bool primitive = true;
  int trials = 100;
  std::function<std::vector<Matrix>(Rng&)> make_inputs;
  TensorFn fn;
};

GradSuiteEntry run_check(const Check& check, const std::string& corrupt_op) {
  GradSuiteEntry entry;
  entry.name = check.name;
  entry.primitive = check.primitive;
  entry.tol = 1e-4;
  Rng rng(0x9d2c5680 + std::hash<std::string>{}(check.name));
  const TensorFn fn = maybe_corrupt(check.fn, check.name == corrupt_op);
  for (int trial = 0; trial < check.trials; ++trial) {
    const auto inputs = check.make_inputs(rng);
    const auto report = ad::grad_check(fn, inputs, entry.tol);
    entry.max_rel_error = std::max(entry.max_rel_error, report.max_rel_error);
  }
  entry.passed = entry.max_rel_error <= entry.tol;
  return entry;
}

// loss = sum(R .* op(x)) so every output element sees a distinct upstream
// gradient
Var weighted_sum(Tape& t, Var out, uint64_t seed) {
  Rng rng(seed);
  return t.sum_reduce(t.hadamard(out, t.constant(random_matrix(rng, out.rows(), out.cols()))));
}

std::vector<Check> primitive_checks() {
  std::vector<Check> checks;
  auto plain2 = [](Rng& rng) {
    return std::vector<Matrix>{random_matrix(rng, 3, 4), random_matrix(rng, 3, 4)};
  };
  auto plain1 = [](Rng& rng) { return std::vector<Matrix>{random_matrix(rng, 3, 4)}; };

  checks.push_back({"add", true, 100, plain2, [](Tape& t, std::span<const Var> xs) {
                      return weighted_sum(t, t.add(xs[0], xs[1]), 11);
                    }});
  checks.push_back({"subtract", true, 100, plain2, [](Tape& t, std::span<const Var> xs) {
                      return weighted_sum(t, t.subtract(xs[0], xs[1]), 12);
                    }});
  checks.push_back({"hadamard", true, 100, plain2, [](Tape& t, std::span<const Var> xs) {
                      return weighted_sum(t, t.hadamard(xs[0], xs[1]), 13);
                    }});
  checks.push_back({"matmul", true, 100,
                    [](Rng& rng) {
                      return std::vector<Matrix>{random_matrix(rng, 3, 5),
                                                 random_matrix(rng, 5, 4)};
                    },
                    [](Tape& t, std::span<const Var> xs) {
                      return weighted_sum(t, t.matmul(xs[0], xs[1]), 14);
                    }});
  checks.push_back({"concat_cols", true, 100,
                    [](Rng& rng) {
                      return std::vector<Matrix>{random_matrix(rng, 3, 2),
                                                 random_matrix(rng, 3, 4)};
                    },
                    [](Tape& t, std::span<const Var> xs) {
                      return weighted_sum(t, t.concat_cols(xs[0], xs[1]), 15);
                    }});
  checks.push_back({"concat_rows", true, 100,
                    [](Rng& rng) {
                      return std::vector<Matrix>{random_matrix(rng, 2, 4),
                                                 random_matrix(rng, 3, 4)};
                    },
                    [](Tape& t, std::span<const Var> xs) {
                      const std::vector<Var> parts{xs[0], xs[1]};
                      return weighted_sum(t, t.concat_rows(parts), 16);
                    }});
  checks.push_back({"gather_rows", true, 100, plain1, [](Tape& t, std::span<const Var> xs) {
                      return weighted_sum(t, t.gather_rows(xs[0], {2, 0, 2, 1}), 17);
                    }});
  checks.push_back({"broadcast_row", true, 100,
                    [](Rng& rng) { return std::vector<Matrix>{random_matrix(rng, 1, 5)}; },
                    [](Tape& t, std::span<const Var> xs) {
                      return weighted_sum(t, t.broadcast_row(xs[0], 4), 18);
                    }});
  checks.push_back({"relu", true, 100,
                    [](Rng& rng) { return std::vector<Matrix>{random_off_kink(rng, 3, 4)}; },
                    [](Tape& t, std::span<const Var> xs) {
                      return weighted_sum(t, t.relu(xs[0]), 19);
                    }});
  checks.push_back({"sigmoid", true, 100, plain1, [](Tape& t, std::span<const Var> xs) {
                      return weighted_sum(t, t.sigmoid(xs[0]), 20);
                    }});
  checks.push_back({"softmax_rows", true, 100, plain1, [](Tape& t, std::span<const Var> xs) {
                      return weighted_sum(t, t.softmax_rows(xs[0]), 21);
                    }});
  checks.push_back({"log", true, 100,
                    [](Rng& rng) {
                      return std::vector<Matrix>{random_matrix(rng, 3, 4, 0.5, 2.0)};
                    },
                    [](Tape& t, std::span<const Var> xs) {
                      return weighted_sum(t, t.log(xs[0]), 22);
                    }});
  checks.push_back({"pow_elem", true, 100,
                    [](Rng& rng) {
                      return std::vector<Matrix>{random_matrix(rng, 3, 4, 0.5, 2.0),
                                                 random_matrix(rng, 3, 4, -1.5, 1.5)};
                    },
                    [](Tape& t, std::span<const Var> xs) {
                      return weighted_sum(t, t.pow_elem(xs[0], xs[1]), 23);
                    }});
  checks.push_back({"max_reduce_rows", true, 100,
                    [](Rng& rng) { return std::vector<Matrix>{random_max_safe(rng, 4, 5)}; },
                    [](Tape& t, std::span<const Var> xs) {
                      return weighted_sum(t, t.max_reduce_rows(xs[0]), 24);
                    }});
  checks.push_back({"mean_reduce", true, 100, plain1, [](Tape& t, std::span<const Var> xs) {
                      return t.mean_reduce(xs[0]);
                    }});
  checks.push_back({"sum_reduce", true, 100, plain1, [](Tape& t, std::span<const Var> xs) {
                      return t.sum_reduce(xs[0]);
                    }});
  checks.push_back({"scalar_mul", true, 100, plain1, [](Tape& t, std::span<const Var> xs) {
                      return weighted_sum(t, t.scalar_mul(xs[0], -2.5), 25);
                    }});
  return checks;
}

// spatial encoding -> adaptive aggregation -> cross-entropy over learnable
// encoders, scales and input features; inputs 0..11 are the three
// positional encoders, 12..17 the per-branch scales/biases, 18/19 the
// center and neighbor features
Check composite_spatial_maa_ce() {
  Check c;
  c.name = "graph_spatial_maa_ce";
  c.primitive = false;
  c.trials = 3;
  c.make_inputs = [](Rng& rng) {
    std::vector<Matrix> in;
    for (int enc = 0; enc < 3; ++enc) {
      in.push_back(random_matrix(rng, 3, 4, -0.6, 0.6));  // w1
      in.push_back(random_matrix(rng, 1, 4, 0.1, 0.5));   // b1
      in.push_back(random_matrix(rng, 4, 4, -0.6, 0.6));  // w2
      in.push_back(random_matrix(rng, 1, 4, -0.3, 0.3));  // b2
    }
    for (int br = 0; br < 3; ++br) {
      in.push_back(random_matrix(rng, 1, 4, 0.5, 1.5));   // alpha
      in.push_back(random_matrix(rng, 1, 4, -0.2, 0.2));  // beta
    }
    in.push_back(random_matrix(rng, 1, 2));  // center features
    in.push_back(random_matrix(rng, 4, 2));  // neighbor features, k=4
    return in;
  };
  c.fn = [](Tape& t, std::span<const Var> xs) {
    Rng geo(313);
    const Matrix nbr_pts = random_matrix(geo, 4, 3);
    const Matrix center_pt = random_matrix(geo, 1, 3);
    const Matrix normal = random_matrix(geo, 1, 3);
    const Matrix curvature = random_matrix(geo, 1, 3, 0.0, 1.0);
    auto enc = [&](int base) {
      return mge::PosEncoderVars{xs[base], xs[base + 1], xs[base + 2], xs[base + 3]};
    };
    Var f_s = mge::spatial_branch(t, xs[18], xs[19], nbr_pts, center_pt, enc(0));
    Var f_n = mge::pos_encode(t, enc(4), t.constant(normal));
    Var f_c = mge::pos_encode(t, enc(8), t.constant(curvature));
    const std::vector<std::pair<mge::MaaBranchVars, Var>> branches{
        {{xs[12], xs[13]}, f_s}, {{xs[14], xs[15]}, f_n}, {{xs[16], xs[17]}, f_c}};
    Var f_g = mge::maa_aggregate(t, branches);
    return heads::cross_entropy(t, f_g, 1);
  };
  return c;
}

Check composite_eq8() {
  Check c;
  c.name = "graph_distance_focal";
  c.primitive = false;
  c.trials = 3;
  constexpr int kPoints = 6;
  c.make_inputs = [](Rng& rng) {
    std::vector<Matrix> in;
    in.push_back(random_matrix(rng, kPoints, 1, -1.5, 1.5));  // fg logits
    in.push_back(random_matrix(rng, 2, 8, -0.7, 0.7));        // dist w1
    in.push_back(random_matrix(rng, 1, 8, 0.05, 0.4));        // dist b1
    in.push_back(random_matrix(rng, 8, 2, -0.7, 0.7));        // dist w2
    in.push_back(random_matrix(rng, 1, 2, -0.3, 0.3));        // dist b2
    return in;
  };
  c.fn = [](Tape& t, std::span<const Var> xs) {
    Rng rng(4242);
    Matrix points = random_matrix(rng, kPoints, 3, -3.0, 3.0);
    std::vector<uint8_t> labels;
    for (int i = 0; i < kPoints; ++i) labels.push_back(i % 2 ? 1 : 0);
    dse::DseVars vars;
    vars.dist_w1 = xs[1];
    vars.dist_b1 = xs[2];
    vars.dist_w2 = xs[3];
    vars.dist_b2 = xs[4];
    Var p = t.sigmoid(xs[0]);
    Var d = dse::distance_factor(t, vars, points);
    return dse::distance_focal_loss(t, p, labels, d);
  };
  return c;
}

Check composite_full_model() {
  ModelConfig mc;
  mc.task = Task::classify;
  mc.num_classes = 2;
  mc.encoder.embed_dim = 4;
  mc.encoder.stages = {{8, 4}};
  auto model = std::make_shared<Model>(mc, 99);

  ShapeSpec spec;
  spec.kind = ShapeKind::sphere;
  spec.n_points = 16;
  spec.noise_sigma = 0.05;
  spec.seed = 7;
  auto cloud = std::make_shared<PointCloud>(center_and_scale(gen_shape(spec)));

  Check c;
  c.name = "model_classify_16pt";
  c.primitive = false;
  c.trials = 1;
  c.make_inputs = [model](Rng&) {
    std::vector<Matrix> in;
    for (const Parameter& p : model->params().all()) in.push_back(p.value);
    return in;
  };
  c.fn = [model, cloud](Tape& t, std::span<const Var> xs) {
    Model::Bound bound = model->bind_with(t, xs);
    return heads::cross_entropy(t, bound.logits(cloud->points), 0);
  };
  return c;
}

}  // namespace

std::vector<GradSuiteEntry> run_gradcheck_suite(const std::string& corrupt_op) {
  std::vector<Check> checks = primitive_checks();
  checks.push_back(composite_spatial_maa_ce());
  checks.push_back(composite_eq8());
  checks.push_back(composite_full_model());

  std::vector<GradSuiteEntry> entries;
  entries.reserve(checks.size());
  for (const Check& c : checks) entries.push_back(run_check(c, corrupt_op));
  return entries;
}

bool gradcheck_suite_passed(const std::vector<GradSuiteEntry>& entries) {
  for (const auto& e : entries)
    if (!e.passed) return false;
  return true;
}

}  // namespace pointe
