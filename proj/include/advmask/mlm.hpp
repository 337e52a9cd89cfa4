#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "advmask/rng.hpp"
#include "advmask/tensor.hpp"

namespace advmask::mlm {

struct MlmConfig {
  std::size_t vocab_size = 0;
  std::size_t hidden_size = 64;
  std::size_t num_layers = 2;
  std::size_t num_heads = 2;
  std::size_t ffn_size = 256;
  std::size_t max_seq_len = 128;
  double dropout = 0.1;

  void validate() const;  // throws ConfigError

  // Full-size preset kept for reference runs; not a test target.
  static MlmConfig full_scale(std::size_t vocab_size);
};

// Pre-layer-norm transformer encoder with learned positional embeddings and
// an untied output projection. Bidirectional attention, no padding logic:
// one sentence per forward pass.
class MlmModel {
 public:
  MlmModel(MlmConfig config, RngStream& init_rng);

  struct Forward {
    nd::NodePtr logits;  // n x vocab_size
    nd::NodePtr hidden;  // n x hidden_size, after the final layer norm
  };

  // training=true applies dropout from dropout_rng (required then).
  Forward forward(std::span<const std::size_t> token_ids, bool training = false,
                  RngStream* dropout_rng = nullptr);

  // Negative log-likelihood of ground-truth tokens at the given positions of
  // an already computed forward pass. Mean or sum over positions.
  nd::NodePtr masked_nll(const Forward& fwd, std::span<const std::size_t> positions,
                         std::span<const std::size_t> ground_truth,
                         nd::Reduction reduction = nd::Reduction::Mean) const;

  // Shannon entropy (nats) of the predictive distribution at every position,
  // from one eval-mode forward pass on the unmasked sentence.
  std::vector<double> position_entropies(std::span<const std::size_t> token_ids);

  const MlmConfig& config() const { return config_; }
  const std::vector<nd::NodePtr>& parameters() const { return params_; }
  std::vector<std::pair<std::string, nd::NodePtr>> named_parameters() const;

 private:
  struct Layer {
    nd::NodePtr ln1_gain, ln1_bias;
    nd::NodePtr wq, bq, wk, bk, wv, bv, wo, bo;
    nd::NodePtr ln2_gain, ln2_bias;
    nd::NodePtr w1, b1, w2, b2;
  };

  nd::NodePtr attention(const Layer& layer, const nd::NodePtr& x, bool training,
                        RngStream* dropout_rng) const;

  MlmConfig config_;
  nd::NodePtr tok_emb_;
  nd::NodePtr pos_emb_;
  std::vector<Layer> layers_;
  nd::NodePtr ln_f_gain_, ln_f_bias_;
  nd::NodePtr out_w_, out_b_;
  std::vector<nd::NodePtr> params_;
};

}  // namespace advmask::mlm
