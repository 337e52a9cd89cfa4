#include "advmask/generator.hpp"

#include <stdexcept>

#include "advmask/errors.hpp"

namespace advmask::adversarial {

using namespace advmask::nd;

void GeneratorConfig::validate() const {
  if (input_size == 0) throw ConfigError("generator input_size must be positive");
  if (hidden_size == 0) throw ConfigError("generator hidden_size must be positive");
  if (dropout < 0.0 || dropout >= 1.0) {
    throw ConfigError("generator dropout must be in [0, 1), got " + std::to_string(dropout));
  }
}

PuzzleGenerator::PuzzleGenerator(GeneratorConfig config, RngStream& init_rng)
    : config_(config) {
  config_.validate();
  w1_ = leaf(randn(config_.input_size, config_.hidden_size, 0.02, init_rng));
  b1_ = leaf(Tensor(1, config_.hidden_size));
  w2_ = leaf(randn(config_.hidden_size, 1, 0.02, init_rng));
  b2_ = leaf(Tensor(1, 1));
  params_ = {w1_, b1_, w2_, b2_};
}

NodePtr PuzzleGenerator::forward(const NodePtr& hidden_states, bool training,
                                 RngStream* dropout_rng) {
  if (hidden_states->value.cols() != config_.input_size) {
    throw std::invalid_argument("generator expects " + std::to_string(config_.input_size) +
                                " input columns, got " +
                                std::to_string(hidden_states->value.cols()));
  }
  if (training && dropout_rng == nullptr) {
    throw std::invalid_argument("generator forward: training mode needs a dropout RNG");
  }
  auto h = gelu(add(matmul(hidden_states, w1_), b1_));
  if (training) h = dropout(h, config_.dropout, *dropout_rng, true);
  return sigmoid(add(matmul(h, w2_), b2_));
}

void PuzzleGenerator::zero_weights() {
  for (const auto& p : params_) p->value.fill(0.0);
}

std::vector<std::pair<std::string, NodePtr>> PuzzleGenerator::named_parameters() const {
  return {{"gen.w1", w1_}, {"gen.b1", b1_}, {"gen.w2", w2_}, {"gen.b2", b2_}};
}

}  // namespace advmask::adversarial
