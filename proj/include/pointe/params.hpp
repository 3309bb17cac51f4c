#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "pointe/matrix.hpp"
#include "pointe/rng.hpp"

namespace pointe {

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;  // same shape, accumulated across backward passes
};

// Named learnable tensors in deterministic insertion order. Names are
// dotted paths ("mge.stage0.pose_s.w1") and must be unique.
class ParamRegistry {
 public:
  Parameter& add(const std::string& name, Matrix init) {
    if (index_.count(name))
      throw Error(ErrorCode::ShapeMismatch, "duplicate parameter " + name);
    index_[name] = static_cast<int>(params_.size());
    Parameter p;
    p.name = name;
    p.grad = Matrix::zeros(init.rows, init.cols);
    p.value = std::move(init);
    params_.push_back(std::move(p));
    return params_.back();
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }

  Parameter& get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end())
      throw Error(ErrorCode::IndexOutOfRange, "unknown parameter " + name);
    return params_[it->second];
  }

  const Parameter& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end())
      throw Error(ErrorCode::IndexOutOfRange, "unknown parameter " + name);
    return params_[it->second];
  }

  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }

  void zero_grad() {
    for (Parameter& p : params_)
      for (double& g : p.grad.data) g = 0.0;
  }

  long total_count() const {
    long n = 0;
    for (const Parameter& p : params_) n += p.value.count();
    return n;
  }

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, int> index_;
};

// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)]; fan_in is the input
// width of a row-vector-times-matrix layer, i.e. the row count.
inline Matrix affine_init(int rows, int cols, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  Matrix m(rows, cols);
  for (double& v : m.data) v = rng.uniform(-bound, bound);
  return m;
}

}  // namespace pointe
