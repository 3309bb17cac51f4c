#include "pointe/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace pointe::ad {

const Matrix& Var::value() const { return tape->value(*this); }
const Matrix& Var::grad() const { return tape->grad(*this); }

int Tape::check(Var v) const {
  if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
    throw Error(ErrorCode::IndexOutOfRange, "var does not belong to this tape");
  return v.id;
}

Var Tape::push(Matrix value, std::function<void(Tape&)> back) {
  Node n;
  n.value = std::move(value);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Matrix& Tape::grad_buf(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Matrix::zeros(n.value.rows, n.value.cols);
  return n.grad;
}

const Matrix& Tape::grad(Var v) const {
  const Node& n = nodes_[check(v)];
  if (n.grad.empty())
    throw Error(ErrorCode::IndexOutOfRange, "gradient not populated; run backward first");
  return n.grad;
}

Var Tape::leaf(Matrix value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.is_leaf = true;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::add(Var a, Var b) {
  const int ia = check(a), ib = check(b);
  require_same_shape(nodes_[ia].value, nodes_[ib].value, "add");
  Matrix out = nodes_[ia].value;
  const Matrix& vb = nodes_[ib].value;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += vb.data[i];
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [self, ia, ib](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    add_scaled(t.grad_buf(ia), g);
    add_scaled(t.grad_buf(ib), g);
  });
}

Var Tape::subtract(Var a, Var b) {
  const int ia = check(a), ib = check(b);
  require_same_shape(nodes_[ia].value, nodes_[ib].value, "subtract");
  Matrix out = nodes_[ia].value;
  const Matrix& vb = nodes_[ib].value;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= vb.data[i];
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [self, ia, ib](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    add_scaled(t.grad_buf(ia), g);
    add_scaled(t.grad_buf(ib), g, -1.0);
  });
}

Var Tape::hadamard(Var a, Var b) {
  const int ia = check(a), ib = check(b);
  require_same_shape(nodes_[ia].value, nodes_[ib].value, "hadamard");
  Matrix out = nodes_[ia].value;
  const Matrix& vb = nodes_[ib].value;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= vb.data[i];
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [self, ia, ib](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    const Matrix& va = t.nodes_[ia].value;
    const Matrix& vb2 = t.nodes_[ib].value;
    Matrix& ga = t.grad_buf(ia);
    Matrix& gb = t.grad_buf(ib);
    for (size_t i = 0; i < g.data.size(); ++i) {
      ga.data[i] += g.data[i] * vb2.data[i];
      gb.data[i] += g.data[i] * va.data[i];
    }
  });
}

Var Tape::matmul(Var a, Var b) {
  const int ia = check(a), ib = check(b);
  Matrix out = pointe::matmul(nodes_[ia].value, nodes_[ib].value);
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [self, ia, ib](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    // dA = G * B^T, dB = A^T * G
    add_scaled(t.grad_buf(ia), matmul_nt(g, t.nodes_[ib].value));
    add_scaled(t.grad_buf(ib), matmul_tn(t.nodes_[ia].value, g));
  });
}

Var Tape::concat_cols(Var a, Var b) {
  const int ia = check(a), ib = check(b);
  const Matrix& va = nodes_[ia].value;
  const Matrix& vb = nodes_[ib].value;
  if (va.rows != vb.rows)
    throw Error(ErrorCode::ShapeMismatch,
                "concat_cols: " + va.shape_str() + " vs " + vb.shape_str());
  Matrix out(va.rows, va.cols + vb.cols);
  for (int r = 0; r < va.rows; ++r) {
    std::copy(va.row_ptr(r), va.row_ptr(r) + va.cols, out.row_ptr(r));
    std::copy(vb.row_ptr(r), vb.row_ptr(r) + vb.cols, out.row_ptr(r) + va.cols);
  }
  const int self = static_cast<int>(nodes_.size());
  const int ca = va.cols, cb = vb.cols;
  return push(std::move(out), [self, ia, ib, ca, cb](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    Matrix& ga = t.grad_buf(ia);
    Matrix& gb = t.grad_buf(ib);
    for (int r = 0; r < g.rows; ++r) {
      const double* grow = g.row_ptr(r);
      double* garow = ga.row_ptr(r);
      double* gbrow = gb.row_ptr(r);
      for (int c = 0; c < ca; ++c) garow[c] += grow[c];
      for (int c = 0; c < cb; ++c) gbrow[c] += grow[ca + c];
    }
  });
}

Var Tape::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw Error(ErrorCode::ShapeMismatch, "concat_rows: no inputs");
  std::vector<int> ids;
  ids.reserve(parts.size());
  int total_rows = 0;
  const int cols = nodes_[check(parts[0])].value.cols;
  for (Var p : parts) {
    const int ip = check(p);
    if (nodes_[ip].value.cols != cols)
      throw Error(ErrorCode::ShapeMismatch, "concat_rows: column mismatch");
    total_rows += nodes_[ip].value.rows;
    ids.push_back(ip);
  }
  Matrix out(total_rows, cols);
  int r0 = 0;
  for (int ip : ids) {
    const Matrix& v = nodes_[ip].value;
    std::copy(v.data.begin(), v.data.end(), out.row_ptr(r0));
    r0 += v.rows;
  }
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [self, ids](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    int r = 0;
    for (int ip : ids) {
      Matrix& gp = t.grad_buf(ip);
      const size_t n = gp.data.size();
      const double* src = g.row_ptr(r);
      for (size_t i = 0; i < n; ++i) gp.data[i] += src[i];
      r += gp.rows;
    }
  });
}

Var Tape::gather_rows(Var a, std::vector<int> rows) {
  const int ia = check(a);
  const Matrix& va = nodes_[ia].value;
  for (int r : rows) {
    if (r < 0 || r >= va.rows)
      throw Error(ErrorCode::IndexOutOfRange,
                  "gather_rows: row " + std::to_string(r) + " of " + va.shape_str());
  }
  Matrix out(static_cast<int>(rows.size()), va.cols);
  for (size_t i = 0; i < rows.size(); ++i)
    std::copy(va.row_ptr(rows[i]), va.row_ptr(rows[i]) + va.cols,
              out.row_ptr(static_cast<int>(i)));
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [self, ia, rows = std::move(rows)](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    Matrix& ga = t.grad_buf(ia);
    for (size_t i = 0; i < rows.size(); ++i) {
      const double* src = g.row_ptr(static_cast<int>(i));
      double* dst = ga.row_ptr(rows[i]);
      for (int c = 0; c < g.cols; ++c) dst[c] += src[c];
    }
  });
}

Var Tape::broadcast_row(Var row, int n_rows) {
  const int ia = check(row);
  const Matrix& va = nodes_[ia].value;
  if (va.rows != 1)
    throw Error(ErrorCode::ShapeMismatch, "broadcast_row: input must be 1xC, got " +
                                              va.shape_str());
  if (n_rows < 1) throw Error(ErrorCode::ShapeMismatch, "broadcast_row: n_rows < 1");
  Matrix out(n_rows, va.cols);
  for (int r = 0; r < n_rows; ++r)
    std::copy(va.data.begin(), va.data.end(), out.row_ptr(r));
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [self, ia](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    Matrix& ga = t.grad_buf(ia);
    for (int r = 0; r < g.rows; ++r) {
      const double* grow = g.row_ptr(r);
      for (int c = 0; c < g.cols; ++c) ga.data[c] += grow[c];
    }
  });
}

Var Tape::relu(Var a) {
  const int ia = check(a);
  Matrix out = nodes_[ia].value;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [self, ia](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    const Matrix& va = t.nodes_[ia].value;
    Matrix& ga = t.grad_buf(ia);
    for (size_t i = 0; i < g.data.size(); ++i)
      if (va.data[i] > 0.0) ga.data[i] += g.data[i];
  });
}

Var Tape::sigmoid(Var a) {
  const int ia = check(a);
  Matrix out = nodes_[ia].value;
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [self, ia](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    const Matrix& s = t.nodes_[self].value;
    Matrix& ga = t.grad_buf(ia);
    for (size_t i = 0; i < g.data.size(); ++i)
      ga.data[i] += g.data[i] * s.data[i] * (1.0 - s.data[i]);
  });
}

Var Tape::softmax_rows(Var a) {
  const int ia = check(a);
  const Matrix& va = nodes_[ia].value;
  Matrix out(va.rows, va.cols);
  for (int r = 0; r < va.rows; ++r) {
    const double* in = va.row_ptr(r);
    double* o = out.row_ptr(r);
    double mx = in[0];
    for (int c = 1; c < va.cols; ++c) mx = std::max(mx, in[c]);
    double sum = 0.0;
    for (int c = 0; c < va.cols; ++c) {
      o[c] = std::exp(in[c] - mx);
      sum += o[c];
    }
    for (int c = 0; c < va.cols; ++c) o[c] /= sum;
  }
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [self, ia](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    const Matrix& p = t.nodes_[self].value;
    Matrix& ga = t.grad_buf(ia);
    for (int r = 0; r < g.rows; ++r) {
      const double* grow = g.row_ptr(r);
      const double* prow = p.row_ptr(r);
      double* garow = ga.row_ptr(r);
      double dot = 0.0;
      for (int c = 0; c < g.cols; ++c) dot += grow[c] * prow[c];
      for (int c = 0; c < g.cols; ++c) garow[c] += prow[c] * (grow[c] - dot);
    }
  });
}

Var Tape::log(Var a) {
  const int ia = check(a);
  Matrix out = nodes_[ia].value;
  for (double& v : out.data) v = std::log(std::max(v, kLogClamp));
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [self, ia](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    const Matrix& va = t.nodes_[ia].value;
    Matrix& ga = t.grad_buf(ia);
    for (size_t i = 0; i < g.data.size(); ++i)
      if (va.data[i] >= kLogClamp) ga.data[i] += g.data[i] / va.data[i];
  });
}

Var Tape::pow_elem(Var base, Var exponent) {
  const int ib = check(base), ie = check(exponent);
  require_same_shape(nodes_[ib].value, nodes_[ie].value, "pow_elem");
  const Matrix& vb = nodes_[ib].value;
  const Matrix& ve = nodes_[ie].value;
  Matrix out(vb.rows, vb.cols);
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = std::pow(std::max(vb.data[i], kPowBaseClamp), ve.data[i]);
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [self, ib, ie](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    const Matrix& o = t.nodes_[self].value;
    const Matrix& vb2 = t.nodes_[ib].value;
    const Matrix& ve2 = t.nodes_[ie].value;
    Matrix& gb = t.grad_buf(ib);
    Matrix& ge = t.grad_buf(ie);
    for (size_t i = 0; i < g.data.size(); ++i) {
      const double b = std::max(vb2.data[i], kPowBaseClamp);
      // base gradient vanishes below the clamp, exponent gradient always flows
      if (vb2.data[i] >= kPowBaseClamp)
        gb.data[i] += g.data[i] * ve2.data[i] * std::pow(b, ve2.data[i] - 1.0);
      ge.data[i] += g.data[i] * o.data[i] * std::log(b);
    }
  });
}

Var Tape::max_reduce_rows(Var a) {
  const int ia = check(a);
  const Matrix& va = nodes_[ia].value;
  if (va.rows < 1) throw Error(ErrorCode::ShapeMismatch, "max_reduce_rows: empty input");
  Matrix out(1, va.cols);
  std::vector<int> argmax(va.cols, 0);
  for (int c = 0; c < va.cols; ++c) out.data[c] = va.at(0, c);
  for (int r = 1; r < va.rows; ++r) {
    const double* row = va.row_ptr(r);
    for (int c = 0; c < va.cols; ++c) {
      if (row[c] > out.data[c]) {  // strict: ties keep the lowest row index
        out.data[c] = row[c];
        argmax[c] = r;
      }
    }
  }
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [self, ia, argmax = std::move(argmax)](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    Matrix& ga = t.grad_buf(ia);
    for (int c = 0; c < g.cols; ++c) ga.at(argmax[c], c) += g.data[c];
  });
}

Var Tape::mean_reduce(Var a) {
  const int ia = check(a);
  const Matrix& va = nodes_[ia].value;
  if (va.count() == 0) throw Error(ErrorCode::ShapeMismatch, "mean_reduce: empty input");
  double sum = 0.0;
  for (double v : va.data) sum += v;
  const double inv = 1.0 / va.count();
  const int self = static_cast<int>(nodes_.size());
  return push(Matrix::filled(1, 1, sum * inv), [self, ia, inv](Tape& t) {
    const double g = t.nodes_[self].grad.data[0] * inv;
    Matrix& ga = t.grad_buf(ia);
    for (double& v : ga.data) v += g;
  });
}

Var Tape::sum_reduce(Var a) {
  const int ia = check(a);
  const Matrix& va = nodes_[ia].value;
  double sum = 0.0;
  for (double v : va.data) sum += v;
  const int self = static_cast<int>(nodes_.size());
  return push(Matrix::filled(1, 1, sum), [self, ia](Tape& t) {
    const double g = t.nodes_[self].grad.data[0];
    Matrix& ga = t.grad_buf(ia);
    for (double& v : ga.data) v += g;
  });
}

Var Tape::scalar_mul(Var a, double s) {
  const int ia = check(a);
  Matrix out = nodes_[ia].value;
  for (double& v : out.data) v *= s;
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [self, ia, s](Tape& t) {
    add_scaled(t.grad_buf(ia), t.nodes_[self].grad, s);
  });
}

void Tape::backward(Var loss) {
  const int il = check(loss);
  const Node& ln = nodes_[il];
  if (ln.value.rows != 1 || ln.value.cols != 1)
    throw Error(ErrorCode::NotScalarLoss, "loss must be 1x1, got " + ln.value.shape_str());
  // reset non-leaf gradients; leaf gradients accumulate across calls
  for (Node& n : nodes_) {
    if (!n.is_leaf) n.grad = Matrix();
  }
  grad_buf(il).data[0] += 1.0;
  for (int id = il; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.back && grad_live(id)) n.back(*this);
  }
  // leaves the loss never reached report an exactly-zero gradient
  for (int id = 0; id < static_cast<int>(nodes_.size()); ++id) {
    if (nodes_[id].is_leaf && nodes_[id].requires_grad) grad_buf(id);
  }
}

void Tape::zero_grad() {
  for (Node& n : nodes_) n.grad = Matrix();
}

GradCheckReport grad_check(const TensorFn& f, const std::vector<Matrix>& inputs, double tol,
                           double step) {
  // analytic pass
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(inputs.size());
  for (const Matrix& m : inputs) leaves.push_back(tape.leaf(m, true));
  Var loss = f(tape, leaves);
  tape.backward(loss);

  std::vector<Matrix> analytic;
  analytic.reserve(inputs.size());
  for (Var v : leaves) analytic.push_back(v.grad());

  auto eval = [&](const std::vector<Matrix>& xs) {
    Tape t;
    std::vector<Var> ls;
    ls.reserve(xs.size());
    for (const Matrix& m : xs) ls.push_back(t.leaf(m, false));
    return f(t, ls).value().data[0];
  };

  GradCheckReport report;
  std::vector<Matrix> work = inputs;
  for (size_t i = 0; i < inputs.size(); ++i) {
    for (size_t j = 0; j < inputs[i].data.size(); ++j) {
      const double orig = work[i].data[j];
      work[i].data[j] = orig + step;
      const double fp = eval(work);
      work[i].data[j] = orig - step;
      const double fm = eval(work);
      work[i].data[j] = orig;
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic[i].data[j];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1.0});
      const double rel = std::fabs(a - numeric) / denom;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_entry =
            "input " + std::to_string(i) + ", element " + std::to_string(j);
      }
    }
  }
  report.passed = report.max_rel_error <= tol;
  return report;
}

}  // namespace pointe::ad
