#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pointe/matrix.hpp"

namespace pointe::ad {

class Tape;

// Handle to a tape node. Cheap to copy; values and gradients live on the
// tape and stay valid for the tape's lifetime.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Matrix& value() const;
  const Matrix& grad() const;
  int rows() const { return value().rows; }
  int cols() const { return value().cols; }
};

// Records a forward computation over dense matrices and replays it in
// reverse to accumulate gradients. One tape per forward/backward pass;
// independent tapes may run on different threads.
//
// Numeric policies:
//   - log clamps its argument to [1e-7, inf) in forward and backward.
//   - pow_elem clamps its base the same way; the base gradient is zero
//     below the clamp, the exponent gradient always flows.
//   - max_reduce_rows routes gradient to the lowest-index maximal row.
// No implicit broadcasting: shapes must match exactly except where an op
// says otherwise.
class Tape {
 public:
  static constexpr double kLogClamp = 1e-7;
  static constexpr double kPowBaseClamp = 1e-7;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Matrix value, bool requires_grad = false);
  Var constant(Matrix value) { return leaf(std::move(value), false); }
  Var scalar(double v) { return leaf(Matrix::filled(1, 1, v), false); }

  Var add(Var a, Var b);
  Var subtract(Var a, Var b);
  Var hadamard(Var a, Var b);
  Var matmul(Var a, Var b);
  Var concat_cols(Var a, Var b);
  Var concat_rows(std::span<const Var> parts);
  Var gather_rows(Var a, std::vector<int> rows);
  Var broadcast_row(Var row, int n_rows);
  Var relu(Var a);
  Var sigmoid(Var a);
  Var softmax_rows(Var a);
  Var log(Var a);
  Var pow_elem(Var base, Var exponent);
  Var max_reduce_rows(Var a);  // R x C -> 1 x C, column-wise max over rows
  Var mean_reduce(Var a);      // -> 1 x 1
  Var sum_reduce(Var a);       // -> 1 x 1
  Var scalar_mul(Var a, double s);

  // Accumulates d(loss)/d(leaf) into every requires_grad leaf. loss must
  // be 1x1. Repeated calls keep accumulating into leaf gradients.
  void backward(Var loss);

  void zero_grad();

  const Matrix& value(Var v) const { return nodes_[check(v)].value; }
  const Matrix& grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[check(v)].requires_grad; }
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;  // empty until touched by backward
    bool requires_grad = false;
    bool is_leaf = false;
    std::function<void(Tape&)> back;  // null for leaves
  };

  int check(Var v) const;
  Var push(Matrix value, std::function<void(Tape&)> back);
  Matrix& grad_buf(int id);
  // true if the node's gradient has been touched in the current sweep
  bool grad_live(int id) const { return !nodes_[id].grad.empty(); }

  std::vector<Node> nodes_;
};

// Builds a scalar loss from the given input leaves.
using TensorFn = std::function<Var(Tape&, std::span<const Var>)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  bool passed = false;
  std::string worst_entry;  // "input i, element j"
};

// Compares analytic gradients of f against central finite differences of
// the given step over every input element. Relative error uses
// |a - n| / max(|a|, |n|, 1).
GradCheckReport grad_check(const TensorFn& f, const std::vector<Matrix>& inputs, double tol,
                           double step = 1e-6);

}  // namespace pointe::ad
