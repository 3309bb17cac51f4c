#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <memory>
#include <set>

#include "pointe/mge.hpp"
#include "pointe/model.hpp"
#include "pointe/rng.hpp"
#include "pointe/sampling.hpp"
#include "pointe/surface.hpp"

using namespace pointe;
using ad::Tape;
using ad::Var;

namespace {

Matrix random_matrix(Rng& rng, int r, int c, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (double& v : m.data) v = rng.uniform(lo, hi);
  return m;
}

mge::PosEncoderVars make_encoder(Tape& t, const Matrix& w1, const Matrix& b1, const Matrix& w2,
                                 const Matrix& b2, bool requires_grad = false) {
  return {t.leaf(w1, requires_grad), t.leaf(b1, requires_grad), t.leaf(w2, requires_grad),
          t.leaf(b2, requires_grad)};
}

mge::PosEncoderVars zero_encoder(Tape& t, int in, int out) {
  return make_encoder(t, Matrix::zeros(in, out), Matrix::zeros(1, out), Matrix::zeros(out, out),
                      Matrix::zeros(1, out));
}

}  // namespace

TEST_CASE("pos_encode with zero parameters returns zero") {
  Tape t;
  Rng rng(31);
  auto enc = zero_encoder(t, 3, 6);
  Var out = mge::pos_encode(t, enc, t.constant(random_matrix(rng, 5, 3)));
  for (double v : out.value().data) CHECK(v == 0.0);
}

TEST_CASE("pos_encode identity configuration passes positive input through") {
  Tape t;
  auto enc = make_encoder(t, Matrix::identity(3), Matrix::zeros(1, 3), Matrix::identity(3),
                          Matrix::zeros(1, 3));
  Rng rng(32);
  const Matrix x = random_matrix(rng, 4, 3, 0.1, 2.0);
  Var out = mge::pos_encode(t, enc, t.constant(x));
  CHECK(max_abs_diff(out.value(), x) < 1e-15);
}

TEST_CASE("pos_encode matches a direct matmul-relu-matmul oracle") {
  Rng rng(33);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 3, in = 3, out = 5;
    const Matrix w1 = random_matrix(rng, in, out), b1 = random_matrix(rng, 1, out);
    const Matrix w2 = random_matrix(rng, out, out), b2 = random_matrix(rng, 1, out);
    const Matrix x = random_matrix(rng, n, in);

    Tape t;
    auto enc = make_encoder(t, w1, b1, w2, b2);
    const Matrix got = mge::pos_encode(t, enc, t.constant(x)).value();

    Matrix expect(n, out);
    for (int i = 0; i < n; ++i) {
      std::vector<double> h(out, 0.0);
      for (int j = 0; j < out; ++j) {
        double s = b1.at(0, j);
        for (int k = 0; k < in; ++k) s += x.at(i, k) * w1.at(k, j);
        h[j] = s > 0 ? s : 0;
      }
      for (int j = 0; j < out; ++j) {
        double s = b2.at(0, j);
        for (int k = 0; k < out; ++k) s += h[k] * w2.at(k, j);
        expect.at(i, j) = s;
      }
    }
    CHECK(max_abs_diff(got, expect) < 1e-12);
  }
}

TEST_CASE("spatial branch collapses to zero when the encoder is zero") {
  Tape t;
  Rng rng(34);
  const int k = 5, d = 3;
  auto enc = zero_encoder(t, 3, 2 * d);
  Var out = mge::spatial_branch(t, t.constant(random_matrix(rng, 1, d)),
                                t.constant(random_matrix(rng, k, d)),
                                random_matrix(rng, k, 3), random_matrix(rng, 1, 3), enc);
  for (double v : out.value().data) CHECK(v == 0.0);
}

TEST_CASE("spatial branch is invariant to neighbor permutation") {
  Rng rng(35);
  const int k = 6, d = 2;
  const Matrix cf = random_matrix(rng, 1, d);
  const Matrix nf = random_matrix(rng, k, d);
  const Matrix np = random_matrix(rng, k, 3);
  const Matrix cp = random_matrix(rng, 1, 3);
  const Matrix w1 = random_matrix(rng, 3, 2 * d), b1 = random_matrix(rng, 1, 2 * d);
  const Matrix w2 = random_matrix(rng, 2 * d, 2 * d), b2 = random_matrix(rng, 1, 2 * d);

  Tape t;
  auto enc = make_encoder(t, w1, b1, w2, b2);
  const Matrix base =
      mge::spatial_branch(t, t.constant(cf), t.constant(nf), np, cp, enc).value();

  std::vector<int> perm{3, 0, 5, 1, 4, 2};
  Matrix nf_p(k, d), np_p(k, 3);
  for (int i = 0; i < k; ++i) {
    for (int c = 0; c < d; ++c) nf_p.at(i, c) = nf.at(perm[i], c);
    for (int c = 0; c < 3; ++c) np_p.at(i, c) = np.at(perm[i], c);
  }
  Tape t2;
  auto enc2 = make_encoder(t2, w1, b1, w2, b2);
  const Matrix permuted =
      mge::spatial_branch(t2, t2.constant(cf), t2.constant(nf_p), np_p, cp, enc2).value();
  CHECK(max_abs_diff(base, permuted) < 1e-12);
}

TEST_CASE("spatial branch equals a scalar-by-scalar trace of the encoding") {
  // k=4 neighbors, feature width 2, channels 4, every weight hand-set
  const Matrix cf = Matrix::from_nested({{0.5, -1.0}});
  const Matrix nf =
      Matrix::from_nested({{0.5, -1.0}, {1.0, 2.0}, {-0.5, 0.25}, {2.0, -2.0}});
  const Matrix np = Matrix::from_nested(
      {{0.0, 0.0, 0.0}, {0.2, -0.1, 0.3}, {-0.4, 0.2, 0.1}, {0.1, 0.5, -0.2}});
  const Matrix cp = Matrix::from_nested({{0.0, 0.0, 0.0}});
  const Matrix w1 = Matrix::from_nested({{0.5, -0.25, 1.0, 0.0},
                                         {0.75, 0.5, -0.5, 1.0},
                                         {-1.0, 0.25, 0.5, 0.5}});
  const Matrix b1 = Matrix::from_nested({{0.1, -0.2, 0.3, 0.0}});
  const Matrix w2 = Matrix::from_nested({{1.0, 0.5, 0.0, -0.5},
                                         {0.0, 1.0, 0.25, 0.5},
                                         {-0.5, 0.0, 1.0, 0.25},
                                         {0.25, -0.25, 0.5, 1.0}});
  const Matrix b2 = Matrix::from_nested({{-0.1, 0.2, 0.0, 0.1}});

  Tape t;
  auto enc = make_encoder(t, w1, b1, w2, b2);
  const Matrix got =
      mge::spatial_branch(t, t.constant(cf), t.constant(nf), np, cp, enc).value();

  // independent trace, plain scalars all the way down
  double off[4][3], mean[3] = {0, 0, 0}, sd[3];
  for (int j = 0; j < 4; ++j)
    for (int c = 0; c < 3; ++c) {
      off[j][c] = np.at(j, c) - cp.at(0, c);
      mean[c] += off[j][c] / 4.0;
    }
  for (int c = 0; c < 3; ++c) {
    double var = 0;
    for (int j = 0; j < 4; ++j) var += (off[j][c] - mean[c]) * (off[j][c] - mean[c]);
    sd[c] = std::max(std::sqrt(var / 4.0), 1e-5);
  }
  double best[4] = {-1e300, -1e300, -1e300, -1e300};
  for (int j = 0; j < 4; ++j) {
    double dp[3];
    for (int c = 0; c < 3; ++c) dp[c] = (off[j][c] - mean[c]) / sd[c];
    double h[4], pe[4];
    for (int o = 0; o < 4; ++o) {
      double s = b1.at(0, o);
      for (int c = 0; c < 3; ++c) s += dp[c] * w1.at(c, o);
      h[o] = s > 0 ? s : 0;
    }
    for (int o = 0; o < 4; ++o) {
      double s = b2.at(0, o);
      for (int c = 0; c < 4; ++c) s += h[c] * w2.at(c, o);
      pe[o] = s;
    }
    const double cat[4] = {cf.at(0, 0), cf.at(0, 1), nf.at(j, 0), nf.at(j, 1)};
    for (int o = 0; o < 4; ++o) {
      const double e = (cat[o] + pe[o]) * pe[o];
      if (e > best[o]) best[o] = e;
    }
  }
  for (int o = 0; o < 4; ++o) CHECK(got.at(0, o) == doctest::Approx(best[o]).epsilon(1e-12));
}

TEST_CASE("maa aggregation identities") {
  Rng rng(36);
  const int c = 5;
  Tape t;
  const Matrix f1 = random_matrix(rng, 1, c), f2 = random_matrix(rng, 1, c),
               f3 = random_matrix(rng, 1, c);
  auto ones = t.constant(Matrix::filled(1, c, 1.0));
  auto zeros = t.constant(Matrix::zeros(1, c));

  const std::vector<std::pair<mge::MaaBranchVars, Var>> identity{
      {{ones, zeros}, t.constant(f1)},
      {{ones, zeros}, t.constant(f2)},
      {{ones, zeros}, t.constant(f3)}};
  const Matrix sum = mge::maa_aggregate(t, identity).value();
  for (int i = 0; i < c; ++i)
    CHECK(sum.at(0, i) ==
          doctest::Approx(f1.at(0, i) + f2.at(0, i) + f3.at(0, i)).epsilon(1e-14));

  const std::vector<std::pair<mge::MaaBranchVars, Var>> zeroed{
      {{zeros, zeros}, t.constant(f1)}, {{zeros, zeros}, t.constant(f2)}};
  for (double v : mge::maa_aggregate(t, zeroed).value().data) CHECK(v == 0.0);
}

TEST_CASE("maa matches an elementwise oracle and is linear when beta is zero") {
  Rng rng(37);
  const int rows = 3, c = 4;
  const Matrix a1 = random_matrix(rng, 1, c), b1 = random_matrix(rng, 1, c);
  const Matrix a2 = random_matrix(rng, 1, c), b2 = random_matrix(rng, 1, c);
  const Matrix f1 = random_matrix(rng, rows, c), f2 = random_matrix(rng, rows, c);

  Tape t;
  const std::vector<std::pair<mge::MaaBranchVars, Var>> branches{
      {{t.constant(a1), t.constant(b1)}, t.constant(f1)},
      {{t.constant(a2), t.constant(b2)}, t.constant(f2)}};
  const Matrix got = mge::maa_aggregate(t, branches).value();
  for (int r = 0; r < rows; ++r)
    for (int i = 0; i < c; ++i)
      CHECK(got.at(r, i) == doctest::Approx(a1.at(0, i) * f1.at(r, i) + b1.at(0, i) +
                                            a2.at(0, i) * f2.at(r, i) + b2.at(0, i))
                                .epsilon(1e-12));

  // with beta = 0 the map is linear in each branch feature
  Tape t2;
  auto zeros = t2.constant(Matrix::zeros(1, c));
  auto alpha = t2.constant(a1);
  const Matrix fa = random_matrix(rng, 1, c), fb = random_matrix(rng, 1, c);
  Matrix combo(1, c);
  for (int i = 0; i < c; ++i) combo.at(0, i) = 2.0 * fa.at(0, i) - 3.0 * fb.at(0, i);
  const std::vector<std::pair<mge::MaaBranchVars, Var>> lhs{{{alpha, zeros}, t2.constant(combo)}};
  const std::vector<std::pair<mge::MaaBranchVars, Var>> ra{{{alpha, zeros}, t2.constant(fa)}};
  const std::vector<std::pair<mge::MaaBranchVars, Var>> rb{{{alpha, zeros}, t2.constant(fb)}};
  const Matrix l = mge::maa_aggregate(t2, lhs).value();
  const Matrix va = mge::maa_aggregate(t2, ra).value();
  const Matrix vb = mge::maa_aggregate(t2, rb).value();
  for (int i = 0; i < c; ++i)
    CHECK(l.at(0, i) ==
          doctest::Approx(2.0 * va.at(0, i) - 3.0 * vb.at(0, i)).epsilon(1e-12));
}

TEST_CASE("concat aggregation identities and oracle") {
  Rng rng(38);
  const int c = 4;
  Tape t;
  const Matrix f1 = random_matrix(rng, 1, c), f2 = random_matrix(rng, 1, c),
               f3 = random_matrix(rng, 1, c);
  const std::vector<Var> branches{t.constant(f1), t.constant(f2), t.constant(f3)};

  Var zero_w = t.constant(Matrix::zeros(3 * c, c));
  Var zero_b = t.constant(Matrix::zeros(1, c));
  for (double v : mge::concat_aggregate(t, zero_w, zero_b, branches).value().data)
    CHECK(v == 0.0);

  // identity block selecting the first branch
  Matrix sel(3 * c, c);
  for (int i = 0; i < c; ++i) sel.at(i, i) = 1.0;
  const Matrix picked =
      mge::concat_aggregate(t, t.constant(sel), zero_b, branches).value();
  CHECK(max_abs_diff(picked, f1) < 1e-15);

  const Matrix w = random_matrix(rng, 3 * c, c), b = random_matrix(rng, 1, c);
  const Matrix got = mge::concat_aggregate(t, t.constant(w), t.constant(b), branches).value();
  for (int o = 0; o < c; ++o) {
    double s = b.at(0, o);
    for (int i = 0; i < c; ++i) {
      s += f1.at(0, i) * w.at(i, o);
      s += f2.at(0, i) * w.at(c + i, o);
      s += f3.at(0, i) * w.at(2 * c + i, o);
    }
    CHECK(got.at(0, o) == doctest::Approx(s).epsilon(1e-12));
  }
}

namespace {

EncoderConfig tiny_cfg(int d0, std::vector<EncoderConfig::Stage> stages) {
  EncoderConfig cfg;
  cfg.embed_dim = d0;
  cfg.stages = std::move(stages);
  return cfg;
}

mge::StageVars zero_stage_vars(Tape& t, int c) {
  mge::StageVars sv;
  sv.pose_spatial = zero_encoder(t, 3, c);
  sv.pose_normal = zero_encoder(t, 3, c);
  sv.pose_curvature = zero_encoder(t, 3, c);
  auto zeros = t.constant(Matrix::zeros(1, c));
  sv.maa_spatial = {zeros, zeros};
  sv.maa_normal = {zeros, zeros};
  sv.maa_curvature = {zeros, zeros};
  return sv;
}

}  // namespace

TEST_CASE("degenerate stage with zero encoders emits zero features over the input set") {
  Rng rng(39);
  const int n = 8, d = 2;
  const Matrix pts = random_matrix(rng, n, 3);
  Tape t;
  Var feats = t.constant(random_matrix(rng, n, d));
  EncoderConfig cfg = tiny_cfg(d, {{n, 1}});
  mge::StageVars sv = zero_stage_vars(t, 2 * d);
  const auto out = mge::mge_stage(t, pts, feats, {n, 1}, sv, cfg);

  CHECK(out.centers.rows == n);
  for (double v : out.features.value().data) CHECK(v == 0.0);
  std::multiset<std::array<double, 3>> in_set, out_set;
  for (int i = 0; i < n; ++i) {
    in_set.insert({pts.at(i, 0), pts.at(i, 1), pts.at(i, 2)});
    out_set.insert({out.centers.at(i, 0), out.centers.at(i, 1), out.centers.at(i, 2)});
  }
  CHECK(in_set == out_set);
}

TEST_CASE("mge_stage equals a per-neighborhood composition of the branch ops") {
  Rng rng(40);
  const int n = 16, d = 3, k = 4, m = 6;
  const int c = 2 * d;
  const Matrix pts = random_matrix(rng, n, 3);
  const Matrix feats = random_matrix(rng, n, d);

  const Matrix sw1 = random_matrix(rng, 3, c), sb1 = random_matrix(rng, 1, c);
  const Matrix sw2 = random_matrix(rng, c, c), sb2 = random_matrix(rng, 1, c);
  const Matrix nw1 = random_matrix(rng, 3, c), nb1 = random_matrix(rng, 1, c);
  const Matrix nw2 = random_matrix(rng, c, c), nb2 = random_matrix(rng, 1, c);
  const Matrix cw1 = random_matrix(rng, 3, c), cb1 = random_matrix(rng, 1, c);
  const Matrix cw2 = random_matrix(rng, c, c), cb2 = random_matrix(rng, 1, c);
  const Matrix as = random_matrix(rng, 1, c), bs = random_matrix(rng, 1, c);
  const Matrix an = random_matrix(rng, 1, c), bn = random_matrix(rng, 1, c);
  const Matrix ac = random_matrix(rng, 1, c), bc = random_matrix(rng, 1, c);

  EncoderConfig cfg = tiny_cfg(d, {{m, k}});

  Tape t;
  mge::StageVars sv;
  sv.pose_spatial = make_encoder(t, sw1, sb1, sw2, sb2);
  sv.pose_normal = make_encoder(t, nw1, nb1, nw2, nb2);
  sv.pose_curvature = make_encoder(t, cw1, cb1, cw2, cb2);
  sv.maa_spatial = {t.constant(as), t.constant(bs)};
  sv.maa_normal = {t.constant(an), t.constant(bn)};
  sv.maa_curvature = {t.constant(ac), t.constant(bc)};
  Var fv = t.constant(feats);
  const auto staged = mge::mge_stage(t, pts, fv, {m, k}, sv, cfg);

  // straight-line re-composition: sampling, grouping, branch ops, then MAA,
  // one neighborhood at a time
  const auto centers = farthest_point_sample(pts, m);
  const auto nbhds = knn_group(pts, centers, k);
  for (int ci = 0; ci < m; ++ci) {
    Tape t2;
    auto enc_s = make_encoder(t2, sw1, sb1, sw2, sb2);
    auto enc_n = make_encoder(t2, nw1, nb1, nw2, nb2);
    auto enc_c = make_encoder(t2, cw1, cb1, cw2, cb2);

    const Matrix nbr_pts = gather_features(pts, nbhds[ci]);
    const Matrix nbr_feats = gather_features(feats, nbhds[ci]);
    Matrix center_pt(1, 3), center_feat(1, d);
    for (int j = 0; j < 3; ++j) center_pt.at(0, j) = pts.at(centers[ci], j);
    for (int j = 0; j < d; ++j) center_feat.at(0, j) = feats.at(centers[ci], j);

    Var f_s = mge::spatial_branch(t2, t2.constant(center_feat), t2.constant(nbr_feats),
                                  nbr_pts, center_pt, enc_s);
    const SurfaceDescriptor sd = surface_descriptor(nbr_pts);
    Matrix normal(1, 3), curv(1, 3);
    for (int j = 0; j < 3; ++j) {
      normal.at(0, j) = sd.normal[j];
      curv.at(0, j) = sd.curvature[j];
    }
    Var f_n = mge::pos_encode(t2, enc_n, t2.constant(normal));
    Var f_c = mge::pos_encode(t2, enc_c, t2.constant(curv));
    const std::vector<std::pair<mge::MaaBranchVars, Var>> branches{
        {{t2.constant(as), t2.constant(bs)}, f_s},
        {{t2.constant(an), t2.constant(bn)}, f_n},
        {{t2.constant(ac), t2.constant(bc)}, f_c}};
    const Matrix expect = mge::maa_aggregate(t2, branches).value();

    for (int o = 0; o < c; ++o)
      CHECK(staged.features.value().at(ci, o) ==
            doctest::Approx(expect.at(0, o)).epsilon(1e-10));
    for (int j = 0; j < 3; ++j)
      CHECK(staged.centers.at(ci, j) == pts.at(centers[ci], j));
  }
}

TEST_CASE("encode doubles the channel width per stage") {
  Rng rng(41);
  {
    ModelConfig mc;
    mc.task = Task::classify;
    mc.num_classes = 2;
    mc.encoder = tiny_cfg(4, {{8, 3}});
    Model model(mc, 1);
    Tape t;
    auto bound = model.bind(t, false);
    const Matrix pts = random_matrix(rng, 16, 3);
    Var feats = bound.point_features(pts);
    CHECK(mc.encoder.final_width() == 8);
    CHECK(model.decoder_width() == 4 + 8);
    CHECK(feats.cols() == model.decoder_width());
  }
  {
    EncoderConfig cfg = tiny_cfg(36, {{16, 4}, {8, 4}, {4, 4}});
    CHECK(cfg.final_width() == 288);
    CHECK(cfg.stage_out_width(0) == 72);
    CHECK(cfg.stage_out_width(1) == 144);
    CHECK(cfg.stage_out_width(2) == 288);
  }
}

TEST_CASE("permuting the input cloud leaves classification logits unchanged") {
  Rng rng(42);
  ModelConfig mc;
  mc.task = Task::classify;
  mc.num_classes = 3;
  mc.encoder = tiny_cfg(6, {{16, 5}, {8, 4}});
  Model model(mc, 5);

  const Matrix pts = random_matrix(rng, 32, 3);
  Tape t;
  const Matrix base = model.bind(t, false).logits(pts).value();

  for (int trial = 0; trial < 10; ++trial) {
    std::vector<int> perm(32);
    for (int i = 0; i < 32; ++i) perm[i] = i;
    rng.shuffle(perm);
    Matrix shuffled(32, 3);
    for (int i = 0; i < 32; ++i)
      for (int c = 0; c < 3; ++c) shuffled.at(i, c) = pts.at(perm[i], c);
    Tape t2;
    const Matrix got = model.bind(t2, false).logits(shuffled).value();
    CHECK(max_abs_diff(base, got) < 1e-6);
  }
}

TEST_CASE("encode is bit-identical across runs with the same seed") {
  Rng rng(43);
  const Matrix pts = random_matrix(rng, 24, 3);
  ModelConfig mc;
  mc.task = Task::classify;
  mc.num_classes = 2;
  mc.encoder = tiny_cfg(4, {{12, 4}, {6, 3}});

  Model m1(mc, 77), m2(mc, 77);
  Tape t1, t2;
  const Matrix a = m1.bind(t1, false).logits(pts).value();
  const Matrix b = m2.bind(t2, false).logits(pts).value();
  CHECK(max_abs_diff(a, b) == 0.0);
}

TEST_CASE("disabling branches reduces aggregation to the spatial term exactly") {
  Rng rng(44);
  const int n = 12, d = 2, k = 3, m = 5;
  const Matrix pts = random_matrix(rng, n, 3);
  const Matrix feats = random_matrix(rng, n, d);
  const int c = 2 * d;

  const Matrix w1 = random_matrix(rng, 3, c), b1 = random_matrix(rng, 1, c);
  const Matrix w2 = random_matrix(rng, c, c), b2 = random_matrix(rng, 1, c);
  const Matrix alpha = random_matrix(rng, 1, c), beta = random_matrix(rng, 1, c);

  EncoderConfig cfg = tiny_cfg(d, {{m, k}});
  cfg.use_normal = false;
  cfg.use_curvature = false;

  Tape t;
  mge::StageVars sv;
  sv.pose_spatial = make_encoder(t, w1, b1, w2, b2);
  sv.maa_spatial = {t.constant(alpha), t.constant(beta)};
  const auto staged = mge::mge_stage(t, pts, t.constant(feats), {m, k}, sv, cfg);

  const auto centers = farthest_point_sample(pts, m);
  const auto nbhds = knn_group(pts, centers, k);
  for (int ci = 0; ci < m; ++ci) {
    Tape t2;
    auto enc = make_encoder(t2, w1, b1, w2, b2);
    const Matrix nbr_pts = gather_features(pts, nbhds[ci]);
    const Matrix nbr_feats = gather_features(feats, nbhds[ci]);
    Matrix center_pt(1, 3), center_feat(1, d);
    for (int j = 0; j < 3; ++j) center_pt.at(0, j) = pts.at(centers[ci], j);
    for (int j = 0; j < d; ++j) center_feat.at(0, j) = feats.at(centers[ci], j);
    const Matrix f_s = mge::spatial_branch(t2, t2.constant(center_feat),
                                           t2.constant(nbr_feats), nbr_pts, center_pt, enc)
                           .value();
    for (int o = 0; o < c; ++o)
      CHECK(staged.features.value().at(ci, o) ==
            doctest::Approx(alpha.at(0, o) * f_s.at(0, o) + beta.at(0, o)).epsilon(1e-12));
  }
}

TEST_CASE("maa and concat aggregation differ in parameters by exactly the scale-vs-projection delta") {
  ModelConfig base;
  base.task = Task::classify;
  base.num_classes = 4;
  base.encoder = tiny_cfg(8, {{32, 6}, {16, 6}});

  ModelConfig with_concat = base;
  with_concat.encoder.aggregation = Aggregation::concat;

  const long maa_total = Model(base, 1).params().total_count();
  const long concat_total = Model(with_concat, 1).params().total_count();

  long expected_delta = 0;
  for (int s = 0; s < 2; ++s) {
    const long c = base.encoder.stage_out_width(s);
    expected_delta += (3 * c * c + c) - 3 * 2 * c;  // projection minus alpha/beta pairs
  }
  CHECK(concat_total - maa_total == expected_delta);
}

TEST_CASE("mge parameters pass a finite-difference check on a small stage") {
  ModelConfig mc;
  mc.task = Task::classify;
  mc.num_classes = 2;
  mc.encoder = tiny_cfg(3, {{6, 3}});
  auto model = std::make_shared<Model>(mc, 1234);
  Rng rng(45);
  const auto pts = std::make_shared<Matrix>(random_matrix(rng, 10, 3));

  std::vector<Matrix> inputs;
  for (const Parameter& p : model->params().all()) inputs.push_back(p.value);
  const ad::TensorFn fn = [model, pts](Tape& t, std::span<const Var> xs) {
    auto bound = model->bind_with(t, xs);
    return heads::cross_entropy(t, bound.logits(*pts), 1);
  };
  const auto rep = ad::grad_check(fn, inputs, 1e-4);
  INFO(rep.worst_entry << " err " << rep.max_rel_error);
  CHECK(rep.passed);
}
