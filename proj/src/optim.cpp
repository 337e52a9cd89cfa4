#include "advmask/optim.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "advmask/errors.hpp"

namespace advmask::nd {
namespace {

void require_finite_grads(std::span<const NodePtr> params) {
  for (std::size_t p = 0; p < params.size(); ++p) {
    const Tensor& g = params[p]->grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g.data()[i])) {
        throw NumericError("training diverged: non-finite gradient in parameter " +
                           std::to_string(p) + " " + g.shape_str());
      }
    }
  }
}

}  // namespace

void zero_grad(std::span<const NodePtr> params) {
  for (const auto& p : params) p->grad.fill(0.0);
}

double grad_norm(std::span<const NodePtr> params) {
  double sq = 0.0;
  for (const auto& p : params) {
    for (std::size_t i = 0; i < p->grad.size(); ++i) {
      double g = p->grad.data()[i];
      sq += g * g;
    }
  }
  return std::sqrt(sq);
}

double clip_global_norm(std::span<const NodePtr> params, double max_norm) {
  require_finite_grads(params);
  double norm = grad_norm(params);
  if (norm > max_norm && norm > 0.0) {
    double s = max_norm / norm;
    for (const auto& p : params) {
      for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad.data()[i] *= s;
    }
  }
  return norm;
}

void Sgd::step(std::span<const NodePtr> params) const {
  require_finite_grads(params);
  for (const auto& p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      p->value.data()[i] -= lr_ * p->grad.data()[i];
    }
  }
}

Adam::Adam(std::vector<NodePtr> params, Config config)
    : params_(std::move(params)), config_(config) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p->value.rows(), p->value.cols());
    v_.emplace_back(p->value.rows(), p->value.cols());
  }
}

void Adam::step() {
  require_finite_grads(params_);
  ++t_;
  double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t p = 0; p < params_.size(); ++p) {
    Tensor& value = params_[p]->value;
    const Tensor& grad = params_[p]->grad;
    for (std::size_t i = 0; i < value.size(); ++i) {
      double g = grad.data()[i];
      double& m = m_[p].data()[i];
      double& v = v_[p].data()[i];
      m = config_.beta1 * m + (1.0 - config_.beta1) * g;
      v = config_.beta2 * v + (1.0 - config_.beta2) * g * g;
      double mhat = m / bc1;
      double vhat = v / bc2;
      value.data()[i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

void Adam::zero_grad() const { advmask::nd::zero_grad(params_); }

}  // namespace advmask::nd
