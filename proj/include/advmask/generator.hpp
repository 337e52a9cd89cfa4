#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "advmask/rng.hpp"
#include "advmask/tensor.hpp"

namespace advmask::adversarial {

struct GeneratorConfig {
  std::size_t input_size = 0;  // must equal the MLM hidden size
  std::size_t hidden_size = 256;
  double dropout = 0.1;

  void validate() const;  // throws ConfigError
};

// Two-layer feed-forward scorer producing one selection probability per
// position: sigmoid(W2 gelu(W1 h_i + b1) + b2).
class PuzzleGenerator {
 public:
  PuzzleGenerator(GeneratorConfig config, RngStream& init_rng);

  // hidden_states is n x input_size; returns n x 1 probabilities in (0, 1).
  nd::NodePtr forward(const nd::NodePtr& hidden_states, bool training = false,
                      RngStream* dropout_rng = nullptr);

  // All-zero parameters; forward then yields exactly 0.5 everywhere.
  void zero_weights();

  const GeneratorConfig& config() const { return config_; }
  const std::vector<nd::NodePtr>& parameters() const { return params_; }
  std::vector<std::pair<std::string, nd::NodePtr>> named_parameters() const;

 private:
  GeneratorConfig config_;
  nd::NodePtr w1_, b1_, w2_, b2_;
  std::vector<nd::NodePtr> params_;
};

}  // namespace advmask::adversarial
