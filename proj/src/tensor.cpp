#include "advmask/tensor.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace advmask::nd {

Tensor Tensor::row(std::vector<double> values) {
  Tensor t;
  t.rows_ = 1;
  t.cols_ = values.size();
  t.data_ = std::move(values);
  return t;
}

Tensor Tensor::scalar(double v) {
  Tensor t(1, 1);
  t.at(0, 0) = v;
  return t;
}

double Tensor::item() const {
  if (rows_ != 1 || cols_ != 1) {
    throw std::invalid_argument("Tensor::item: expected 1x1, got " + shape_str());
  }
  return data_[0];
}

std::string Tensor::shape_str() const {
  return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
}

Tensor randn(std::size_t rows, std::size_t cols, double stddev, RngStream& rng) {
  Tensor t(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = stddev * rng.normal();
  return t;
}

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + a.shape_str() +
                              " and " + b.shape_str());
}

NodePtr make_node(Tensor value, std::vector<NodePtr> inputs,
                  std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->grad = Tensor(value.rows(), value.cols());
  n->value = std::move(value);
  n->requires_grad = false;
  for (const auto& in : inputs) {
    if (in->requires_grad) n->requires_grad = true;
  }
  if (n->requires_grad) {
    n->inputs = std::move(inputs);
    n->backward_fn = std::move(backward_fn);
  }
  return n;
}

}  // namespace

NodePtr leaf(Tensor value) {
  auto n = std::make_shared<Node>();
  n->grad = Tensor(value.rows(), value.cols());
  n->value = std::move(value);
  n->requires_grad = true;
  return n;
}

NodePtr constant(Tensor value) {
  auto n = std::make_shared<Node>();
  // Grad buffer exists as a write target for sibling backward functions; the
  // sweep never reads it.
  n->grad = Tensor(value.rows(), value.cols());
  n->value = std::move(value);
  n->requires_grad = false;
  return n;
}

NodePtr detach(const NodePtr& a) { return constant(a->value); }

NodePtr add(const NodePtr& a, const NodePtr& b) {
  const Tensor& av = a->value;
  const Tensor& bv = b->value;
  bool broadcast = !av.same_shape(bv);
  if (broadcast && (bv.rows() != 1 || bv.cols() != av.cols())) shape_error("add", av, bv);
  Tensor out = av;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) {
      out.at(r, c) += broadcast ? bv.at(0, c) : bv.at(r, c);
    }
  }
  return make_node(std::move(out), {a, b}, [broadcast](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) na.grad.data()[i] += self.grad.data()[i];
    if (broadcast) {
      for (std::size_t r = 0; r < self.grad.rows(); ++r) {
        for (std::size_t c = 0; c < self.grad.cols(); ++c) {
          nb.grad.at(0, c) += self.grad.at(r, c);
        }
      }
    } else {
      for (std::size_t i = 0; i < self.grad.size(); ++i) nb.grad.data()[i] += self.grad.data()[i];
    }
  });
}

NodePtr sub(const NodePtr& a, const NodePtr& b) {
  const Tensor& av = a->value;
  const Tensor& bv = b->value;
  if (!av.same_shape(bv)) shape_error("sub", av, bv);
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= bv.data()[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      na.grad.data()[i] += self.grad.data()[i];
      nb.grad.data()[i] -= self.grad.data()[i];
    }
  });
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
  const Tensor& av = a->value;
  const Tensor& bv = b->value;
  if (!av.same_shape(bv)) shape_error("mul", av, bv);
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= bv.data()[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      na.grad.data()[i] += self.grad.data()[i] * nb.value.data()[i];
      nb.grad.data()[i] += self.grad.data()[i] * na.value.data()[i];
    }
  });
}

NodePtr scale(const NodePtr& a, double s) {
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= s;
  return make_node(std::move(out), {a}, [s](Node& self) {
    Node& na = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      na.grad.data()[i] += s * self.grad.data()[i];
    }
  });
}

NodePtr matmul(const NodePtr& a, const NodePtr& b) {
  const Tensor& av = a->value;
  const Tensor& bv = b->value;
  if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
  Tensor out(av.rows(), bv.cols());
  for (std::size_t i = 0; i < av.rows(); ++i) {
    for (std::size_t k = 0; k < av.cols(); ++k) {
      double aik = av.at(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < bv.cols(); ++j) {
        out.at(i, j) += aik * bv.at(k, j);
      }
    }
  }
  return make_node(std::move(out), {a, b}, [](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    const Tensor& g = self.grad;
    // dA = g B^T, dB = A^T g
    for (std::size_t i = 0; i < na.value.rows(); ++i) {
      for (std::size_t j = 0; j < g.cols(); ++j) {
        double gij = g.at(i, j);
        if (gij == 0.0) continue;
        for (std::size_t k = 0; k < na.value.cols(); ++k) {
          na.grad.at(i, k) += gij * nb.value.at(k, j);
          nb.grad.at(k, j) += gij * na.value.at(i, k);
        }
      }
    }
  });
}

NodePtr matmul_nt(const NodePtr& a, const NodePtr& b) {
  const Tensor& av = a->value;
  const Tensor& bv = b->value;
  if (av.cols() != bv.cols()) shape_error("matmul_nt", av, bv);
  Tensor out(av.rows(), bv.rows());
  for (std::size_t i = 0; i < av.rows(); ++i) {
    for (std::size_t j = 0; j < bv.rows(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < av.cols(); ++k) acc += av.at(i, k) * bv.at(j, k);
      out.at(i, j) = acc;
    }
  }
  return make_node(std::move(out), {a, b}, [](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    const Tensor& g = self.grad;
    // out = A B^T: dA = g B, dB = g^T A
    for (std::size_t i = 0; i < g.rows(); ++i) {
      for (std::size_t j = 0; j < g.cols(); ++j) {
        double gij = g.at(i, j);
        if (gij == 0.0) continue;
        for (std::size_t k = 0; k < na.value.cols(); ++k) {
          na.grad.at(i, k) += gij * nb.value.at(j, k);
          nb.grad.at(j, k) += gij * na.value.at(i, k);
        }
      }
    }
  });
}

namespace {

NodePtr unary_elementwise(const NodePtr& a, double (*fwd)(double), double (*dfd)(double)) {
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = fwd(out.data()[i]);
  return make_node(std::move(out), {a}, [dfd](Node& self) {
    Node& na = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      na.grad.data()[i] += self.grad.data()[i] * dfd(na.value.data()[i]);
    }
  });
}

double sigmoid_fwd(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}
double sigmoid_dfd(double x) {
  double s = sigmoid_fwd(x);
  return s * (1.0 - s);
}
double tanh_fwd(double x) { return std::tanh(x); }
double tanh_dfd(double x) {
  double t = std::tanh(x);
  return 1.0 - t * t;
}
// Exact gelu: x Phi(x) with the Gaussian CDF.
double gelu_fwd(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }
double gelu_dfd(double x) {
  double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))) + x * phi;
}

}  // namespace

NodePtr sigmoid(const NodePtr& a) { return unary_elementwise(a, sigmoid_fwd, sigmoid_dfd); }
NodePtr tanh(const NodePtr& a) { return unary_elementwise(a, tanh_fwd, tanh_dfd); }
NodePtr gelu(const NodePtr& a) { return unary_elementwise(a, gelu_fwd, gelu_dfd); }

namespace {

Tensor softmax_rows(const Tensor& x) {
  Tensor out = x;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double hi = x.at(r, 0);
    for (std::size_t c = 1; c < x.cols(); ++c) hi = std::max(hi, x.at(r, c));
    double total = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) {
      double e = std::exp(x.at(r, c) - hi);
      out.at(r, c) = e;
      total += e;
    }
    for (std::size_t c = 0; c < x.cols(); ++c) out.at(r, c) /= total;
  }
  return out;
}

}  // namespace

NodePtr softmax(const NodePtr& a) {
  Tensor out = softmax_rows(a->value);
  return make_node(std::move(out), {a}, [](Node& self) {
    Node& na = *self.inputs[0];
    const Tensor& s = self.value;
    const Tensor& g = self.grad;
    for (std::size_t r = 0; r < s.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < s.cols(); ++c) dot += g.at(r, c) * s.at(r, c);
      for (std::size_t c = 0; c < s.cols(); ++c) {
        na.grad.at(r, c) += s.at(r, c) * (g.at(r, c) - dot);
      }
    }
  });
}

NodePtr log_softmax(const NodePtr& a) {
  const Tensor& x = a->value;
  Tensor out = x;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double hi = x.at(r, 0);
    for (std::size_t c = 1; c < x.cols(); ++c) hi = std::max(hi, x.at(r, c));
    double total = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) total += std::exp(x.at(r, c) - hi);
    double lse = hi + std::log(total);
    for (std::size_t c = 0; c < x.cols(); ++c) out.at(r, c) = x.at(r, c) - lse;
  }
  return make_node(std::move(out), {a}, [](Node& self) {
    Node& na = *self.inputs[0];
    const Tensor& g = self.grad;
    for (std::size_t r = 0; r < g.rows(); ++r) {
      double gsum = 0.0;
      for (std::size_t c = 0; c < g.cols(); ++c) gsum += g.at(r, c);
      for (std::size_t c = 0; c < g.cols(); ++c) {
        na.grad.at(r, c) += g.at(r, c) - std::exp(self.value.at(r, c)) * gsum;
      }
    }
  });
}

NodePtr layer_norm(const NodePtr& x, const NodePtr& gain, const NodePtr& bias) {
  constexpr double kEps = 1e-5;
  const Tensor& xv = x->value;
  const Tensor& gv = gain->value;
  const Tensor& bv = bias->value;
  if (gv.rows() != 1 || gv.cols() != xv.cols()) shape_error("layer_norm gain", xv, gv);
  if (bv.rows() != 1 || bv.cols() != xv.cols()) shape_error("layer_norm bias", xv, bv);
  std::size_t n = xv.cols();
  Tensor xhat(xv.rows(), n);
  Tensor inv_sd(xv.rows(), 1);
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    double mu = 0.0;
    for (std::size_t c = 0; c < n; ++c) mu += xv.at(r, c);
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      double d = xv.at(r, c) - mu;
      var += d * d;
    }
    var /= static_cast<double>(n);
    double inv = 1.0 / std::sqrt(var + kEps);
    inv_sd.at(r, 0) = inv;
    for (std::size_t c = 0; c < n; ++c) xhat.at(r, c) = (xv.at(r, c) - mu) * inv;
  }
  Tensor out(xv.rows(), n);
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    for (std::size_t c = 0; c < n; ++c) out.at(r, c) = xhat.at(r, c) * gv.at(0, c) + bv.at(0, c);
  }
  return make_node(std::move(out), {x, gain, bias}, [xhat, inv_sd](Node& self) {
    Node& nx = *self.inputs[0];
    Node& ngain = *self.inputs[1];
    Node& nbias = *self.inputs[2];
    const Tensor& g = self.grad;
    std::size_t n = g.cols();
    double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      double mean_gy = 0.0;
      double mean_gyx = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        double gy = g.at(r, c) * ngain.value.at(0, c);
        mean_gy += gy;
        mean_gyx += gy * xhat.at(r, c);
        ngain.grad.at(0, c) += g.at(r, c) * xhat.at(r, c);
        nbias.grad.at(0, c) += g.at(r, c);
      }
      mean_gy *= inv_n;
      mean_gyx *= inv_n;
      for (std::size_t c = 0; c < n; ++c) {
        double gy = g.at(r, c) * ngain.value.at(0, c);
        nx.grad.at(r, c) += (gy - mean_gy - xhat.at(r, c) * mean_gyx) * inv_sd.at(r, 0);
      }
    }
  });
}

NodePtr embedding_lookup(const NodePtr& table, const std::vector<std::size_t>& ids) {
  const Tensor& tv = table->value;
  for (std::size_t id : ids) {
    if (id >= tv.rows()) {
      throw std::invalid_argument("embedding_lookup: id " + std::to_string(id) +
                                  " outside table " + tv.shape_str());
    }
  }
  Tensor out(ids.size(), tv.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    for (std::size_t c = 0; c < tv.cols(); ++c) out.at(r, c) = tv.at(ids[r], c);
  }
  return make_node(std::move(out), {table}, [ids](Node& self) {
    Node& nt = *self.inputs[0];
    for (std::size_t r = 0; r < ids.size(); ++r) {
      for (std::size_t c = 0; c < self.grad.cols(); ++c) {
        nt.grad.at(ids[r], c) += self.grad.at(r, c);
      }
    }
  });
}

NodePtr take_rows(const NodePtr& a, std::vector<std::size_t> rows) {
  const Tensor& av = a->value;
  for (std::size_t r : rows) {
    if (r >= av.rows()) {
      throw std::invalid_argument("take_rows: row " + std::to_string(r) + " outside " +
                                  av.shape_str());
    }
  }
  Tensor out(rows.size(), av.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < av.cols(); ++c) out.at(r, c) = av.at(rows[r], c);
  }
  return make_node(std::move(out), {a}, [rows = std::move(rows)](Node& self) {
    Node& na = *self.inputs[0];
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t c = 0; c < self.grad.cols(); ++c) {
        na.grad.at(rows[r], c) += self.grad.at(r, c);
      }
    }
  });
}

NodePtr concat_cols(const NodePtr& a, const NodePtr& b) {
  const Tensor& av = a->value;
  const Tensor& bv = b->value;
  if (av.rows() != bv.rows()) shape_error("concat_cols", av, bv);
  Tensor out(av.rows(), av.cols() + bv.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < av.cols(); ++c) out.at(r, c) = av.at(r, c);
    for (std::size_t c = 0; c < bv.cols(); ++c) out.at(r, av.cols() + c) = bv.at(r, c);
  }
  return make_node(std::move(out), {a, b}, [](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    std::size_t ac = na.value.cols();
    for (std::size_t r = 0; r < self.grad.rows(); ++r) {
      for (std::size_t c = 0; c < ac; ++c) na.grad.at(r, c) += self.grad.at(r, c);
      for (std::size_t c = 0; c < nb.value.cols(); ++c) {
        nb.grad.at(r, c) += self.grad.at(r, ac + c);
      }
    }
  });
}

NodePtr slice_cols(const NodePtr& a, std::size_t first, std::size_t count) {
  const Tensor& av = a->value;
  if (first + count > av.cols()) {
    throw std::invalid_argument("slice_cols: [" + std::to_string(first) + ", " +
                                std::to_string(first + count) + ") outside " + av.shape_str());
  }
  Tensor out(av.rows(), count);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < count; ++c) out.at(r, c) = av.at(r, first + c);
  }
  return make_node(std::move(out), {a}, [first](Node& self) {
    Node& na = *self.inputs[0];
    for (std::size_t r = 0; r < self.grad.rows(); ++r) {
      for (std::size_t c = 0; c < self.grad.cols(); ++c) {
        na.grad.at(r, first + c) += self.grad.at(r, c);
      }
    }
  });
}

NodePtr dropout(const NodePtr& a, double rate, RngStream& rng, bool training) {
  if (rate < 0.0 || rate >= 1.0) {
    throw std::invalid_argument("dropout: rate " + std::to_string(rate) + " outside [0, 1)");
  }
  if (!training || rate == 0.0) return a;
  // Inverted dropout keeps eval-time scaling at identity.
  Tensor mask(a->value.rows(), a->value.cols());
  double keep = 1.0 - rate;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask.data()[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
  }
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= mask.data()[i];
  return make_node(std::move(out), {a}, [mask](Node& self) {
    Node& na = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      na.grad.data()[i] += self.grad.data()[i] * mask.data()[i];
    }
  });
}

NodePtr cross_entropy(const NodePtr& logits, const std::vector<std::size_t>& targets,
                      Reduction reduction) {
  const Tensor& lv = logits->value;
  if (targets.size() != lv.rows()) {
    throw std::invalid_argument("cross_entropy: " + std::to_string(targets.size()) +
                                " targets for " + lv.shape_str() + " logits");
  }
  for (std::size_t t : targets) {
    if (t >= lv.cols()) {
      throw std::invalid_argument("cross_entropy: target " + std::to_string(t) +
                                  " outside vocabulary of " + std::to_string(lv.cols()));
    }
  }
  Tensor probs = softmax_rows(lv);
  double total = 0.0;
  for (std::size_t r = 0; r < lv.rows(); ++r) {
    // log prob recomputed stably rather than log(probs) to avoid underflow.
    double hi = lv.at(r, 0);
    for (std::size_t c = 1; c < lv.cols(); ++c) hi = std::max(hi, lv.at(r, c));
    double lse = 0.0;
    for (std::size_t c = 0; c < lv.cols(); ++c) lse += std::exp(lv.at(r, c) - hi);
    total -= lv.at(r, targets[r]) - hi - std::log(lse);
  }
  double norm = reduction == Reduction::Mean ? 1.0 / static_cast<double>(lv.rows()) : 1.0;
  return make_node(Tensor::scalar(total * norm), {logits},
                   [probs, targets, norm](Node& self) {
                     Node& nl = *self.inputs[0];
                     double g = self.grad.item() * norm;
                     for (std::size_t r = 0; r < probs.rows(); ++r) {
                       for (std::size_t c = 0; c < probs.cols(); ++c) {
                         double ind = c == targets[r] ? 1.0 : 0.0;
                         nl.grad.at(r, c) += g * (probs.at(r, c) - ind);
                       }
                     }
                   });
}

NodePtr sum(const NodePtr& a) {
  double total = 0.0;
  for (std::size_t i = 0; i < a->value.size(); ++i) total += a->value.data()[i];
  return make_node(Tensor::scalar(total), {a}, [](Node& self) {
    Node& na = *self.inputs[0];
    double g = self.grad.item();
    for (std::size_t i = 0; i < na.grad.size(); ++i) na.grad.data()[i] += g;
  });
}

NodePtr mean(const NodePtr& a) {
  double total = 0.0;
  for (std::size_t i = 0; i < a->value.size(); ++i) total += a->value.data()[i];
  double inv = 1.0 / static_cast<double>(a->value.size());
  return make_node(Tensor::scalar(total * inv), {a}, [inv](Node& self) {
    Node& na = *self.inputs[0];
    double g = self.grad.item() * inv;
    for (std::size_t i = 0; i < na.grad.size(); ++i) na.grad.data()[i] += g;
  });
}

void backward_with_grad(const NodePtr& node, const Tensor& seed) {
  if (!node->value.same_shape(seed)) {
    throw std::invalid_argument("backward: seed shape " + seed.shape_str() +
                                " does not match node " + node->value.shape_str());
  }
  if (!node->requires_grad) return;

  // Iterative post-order DFS over the requires_grad subgraph.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node.get(), 0);
  visited.insert(node.get());
  while (!stack.empty()) {
    auto& [cur, next_child] = stack.back();
    if (next_child < cur->inputs.size()) {
      Node* child = cur->inputs[next_child].get();
      ++next_child;
      if (child->requires_grad && !visited.count(child)) {
        visited.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(cur);
      stack.pop_back();
    }
  }

  // Interior grads are scratch for this sweep; leaf grads accumulate across
  // sweeps until explicitly cleared.
  for (Node* n : order) {
    if (n->backward_fn) n->grad.fill(0.0);
  }
  for (std::size_t i = 0; i < seed.size(); ++i) node->grad.data()[i] += seed.data()[i];

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

void backward(const NodePtr& loss) {
  if (loss->value.rows() != 1 || loss->value.cols() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got " + loss->value.shape_str());
  }
  backward_with_grad(loss, Tensor::scalar(1.0));
}

}  // namespace advmask::nd
