#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "advmask/tensor.hpp"

namespace advmask::nd {

void zero_grad(std::span<const NodePtr> params);
double grad_norm(std::span<const NodePtr> params);
// Scales gradients in place when the global norm exceeds max_norm; returns
// the pre-clip norm. Throws NumericError on non-finite gradients.
double clip_global_norm(std::span<const NodePtr> params, double max_norm);

// Plain gradient descent; mainly for tests and diagnostics.
class Sgd {
 public:
  explicit Sgd(double learning_rate) : lr_(learning_rate) {}
  void step(std::span<const NodePtr> params) const;

 private:
  double lr_;
};

// Adam with bias correction. Moment buffers are keyed by position in the
// parameter list fixed at construction.
class Adam {
 public:
  struct Config {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam(std::vector<NodePtr> params, Config config);

  void step();
  void zero_grad() const;
  std::size_t step_count() const { return t_; }
  double learning_rate() const { return config_.learning_rate; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  const std::vector<NodePtr>& params() const { return params_; }

 private:
  std::vector<NodePtr> params_;
  Config config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::size_t t_ = 0;
};

}  // namespace advmask::nd
