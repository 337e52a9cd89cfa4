#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "advmask/rng.hpp"

namespace advmask::nd {

// Dense row-major matrix of doubles. Vectors are 1 x n rows, scalars 1 x 1.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Tensor row(std::vector<double> values);
  static Tensor scalar(double v);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  // Value of a 1 x 1 tensor.
  double item() const;

  bool same_shape(const Tensor& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  std::string shape_str() const;

  void fill(double v) { std::ranges::fill(data_, v); }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Gaussian-initialized tensor, mean zero.
Tensor randn(std::size_t rows, std::size_t cols, double stddev, RngStream& rng);

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of a define-by-run computation graph. Interior nodes carry a
// backward function that reads this node's grad and accumulates into the
// inputs' grads; leaves carry none. Interior grads are scratch space reset by
// each backward sweep, leaf grads persist and accumulate until cleared.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = true;
  std::vector<NodePtr> inputs;
  std::function<void(Node&)> backward_fn;
};

// Trainable leaf (gradient tracked).
NodePtr leaf(Tensor value);
// Untracked leaf; backward never traverses past it.
NodePtr constant(Tensor value);
// Constant copy of a's current value; cuts the gradient path.
NodePtr detach(const NodePtr& a);

// Elementwise; b may also be a 1 x C row broadcast over a's rows.
NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr sub(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, const NodePtr& b);
NodePtr scale(const NodePtr& a, double s);

NodePtr matmul(const NodePtr& a, const NodePtr& b);
// a (n x k) times b (m x k) transposed -> n x m.
NodePtr matmul_nt(const NodePtr& a, const NodePtr& b);

NodePtr sigmoid(const NodePtr& a);
NodePtr tanh(const NodePtr& a);
NodePtr gelu(const NodePtr& a);

// Row-wise, max-subtracted for stability.
NodePtr softmax(const NodePtr& a);
NodePtr log_softmax(const NodePtr& a);

// Per-row normalization with learned gain and bias (both 1 x C), epsilon 1e-5.
NodePtr layer_norm(const NodePtr& x, const NodePtr& gain, const NodePtr& bias);

// Rows of table gathered by id; backward scatter-adds.
NodePtr embedding_lookup(const NodePtr& table, const std::vector<std::size_t>& ids);
NodePtr take_rows(const NodePtr& a, std::vector<std::size_t> rows);
NodePtr concat_cols(const NodePtr& a, const NodePtr& b);
NodePtr slice_cols(const NodePtr& a, std::size_t first, std::size_t count);

// Inverted dropout; identity when not training or rate is zero.
NodePtr dropout(const NodePtr& a, double rate, RngStream& rng, bool training);

enum class Reduction { Mean, Sum };

// Softmax cross entropy against integer targets, one per logits row.
NodePtr cross_entropy(const NodePtr& logits, const std::vector<std::size_t>& targets,
                      Reduction reduction);

NodePtr sum(const NodePtr& a);
NodePtr mean(const NodePtr& a);

// Reverse sweep from a scalar loss, seeding d(loss)/d(loss) = 1.
void backward(const NodePtr& loss);
// Reverse sweep from an arbitrary node with an explicit output gradient.
void backward_with_grad(const NodePtr& node, const Tensor& seed);

}  // namespace advmask::nd
