#include "advmask/mlm.hpp"

#include <cmath>
#include <stdexcept>

#include "advmask/errors.hpp"

namespace advmask::mlm {

using namespace advmask::nd;

void MlmConfig::validate() const {
  if (vocab_size < 5) {
    throw ConfigError("vocab_size must cover the 4 reserved ids plus at least one token, got " +
                      std::to_string(vocab_size));
  }
  if (hidden_size == 0 || num_layers == 0 || num_heads == 0 || ffn_size == 0 ||
      max_seq_len == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (hidden_size % num_heads != 0) {
    throw ConfigError("hidden_size " + std::to_string(hidden_size) + " not divisible by " +
                      std::to_string(num_heads) + " heads");
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw ConfigError("dropout must be in [0, 1), got " + std::to_string(dropout));
  }
}

MlmConfig MlmConfig::full_scale(std::size_t vocab_size) {
  MlmConfig cfg;
  cfg.vocab_size = vocab_size;
  cfg.hidden_size = 768;
  cfg.num_layers = 12;
  cfg.num_heads = 12;
  cfg.ffn_size = 3072;
  cfg.max_seq_len = 128;
  cfg.dropout = 0.1;
  return cfg;
}

namespace {

constexpr double kInitStd = 0.02;

NodePtr ln_gain(std::size_t n) { return leaf(Tensor(1, n, 1.0)); }
NodePtr ln_bias(std::size_t n) { return leaf(Tensor(1, n, 0.0)); }

}  // namespace

MlmModel::MlmModel(MlmConfig config, RngStream& init_rng) : config_(config) {
  config_.validate();
  std::size_t h = config_.hidden_size;
  tok_emb_ = leaf(randn(config_.vocab_size, h, kInitStd, init_rng));
  pos_emb_ = leaf(randn(config_.max_seq_len, h, kInitStd, init_rng));
  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    Layer layer;
    layer.ln1_gain = ln_gain(h);
    layer.ln1_bias = ln_bias(h);
    layer.wq = leaf(randn(h, h, kInitStd, init_rng));
    layer.bq = leaf(Tensor(1, h));
    layer.wk = leaf(randn(h, h, kInitStd, init_rng));
    layer.bk = leaf(Tensor(1, h));
    layer.wv = leaf(randn(h, h, kInitStd, init_rng));
    layer.bv = leaf(Tensor(1, h));
    layer.wo = leaf(randn(h, h, kInitStd, init_rng));
    layer.bo = leaf(Tensor(1, h));
    layer.ln2_gain = ln_gain(h);
    layer.ln2_bias = ln_bias(h);
    layer.w1 = leaf(randn(h, config_.ffn_size, kInitStd, init_rng));
    layer.b1 = leaf(Tensor(1, config_.ffn_size));
    layer.w2 = leaf(randn(config_.ffn_size, h, kInitStd, init_rng));
    layer.b2 = leaf(Tensor(1, h));
    layers_.push_back(layer);
  }
  ln_f_gain_ = ln_gain(h);
  ln_f_bias_ = ln_bias(h);
  out_w_ = leaf(randn(h, config_.vocab_size, kInitStd, init_rng));
  out_b_ = leaf(Tensor(1, config_.vocab_size));

  params_ = {tok_emb_, pos_emb_};
  for (auto& layer : layers_) {
    for (const auto& p :
         {layer.ln1_gain, layer.ln1_bias, layer.wq, layer.bq, layer.wk, layer.bk, layer.wv,
          layer.bv, layer.wo, layer.bo, layer.ln2_gain, layer.ln2_bias, layer.w1, layer.b1,
          layer.w2, layer.b2}) {
      params_.push_back(p);
    }
  }
  params_.push_back(ln_f_gain_);
  params_.push_back(ln_f_bias_);
  params_.push_back(out_w_);
  params_.push_back(out_b_);
}

std::vector<std::pair<std::string, NodePtr>> MlmModel::named_parameters() const {
  std::vector<std::pair<std::string, NodePtr>> named;
  named.emplace_back("tok_emb", tok_emb_);
  named.emplace_back("pos_emb", pos_emb_);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    std::string p = "layer" + std::to_string(l) + ".";
    named.emplace_back(p + "ln1.gain", layer.ln1_gain);
    named.emplace_back(p + "ln1.bias", layer.ln1_bias);
    named.emplace_back(p + "attn.wq", layer.wq);
    named.emplace_back(p + "attn.bq", layer.bq);
    named.emplace_back(p + "attn.wk", layer.wk);
    named.emplace_back(p + "attn.bk", layer.bk);
    named.emplace_back(p + "attn.wv", layer.wv);
    named.emplace_back(p + "attn.bv", layer.bv);
    named.emplace_back(p + "attn.wo", layer.wo);
    named.emplace_back(p + "attn.bo", layer.bo);
    named.emplace_back(p + "ln2.gain", layer.ln2_gain);
    named.emplace_back(p + "ln2.bias", layer.ln2_bias);
    named.emplace_back(p + "ffn.w1", layer.w1);
    named.emplace_back(p + "ffn.b1", layer.b1);
    named.emplace_back(p + "ffn.w2", layer.w2);
    named.emplace_back(p + "ffn.b2", layer.b2);
  }
  named.emplace_back("ln_f.gain", ln_f_gain_);
  named.emplace_back("ln_f.bias", ln_f_bias_);
  named.emplace_back("out.w", out_w_);
  named.emplace_back("out.b", out_b_);
  return named;
}

NodePtr MlmModel::attention(const Layer& layer, const NodePtr& x, bool training,
                            RngStream* dropout_rng) const {
  std::size_t heads = config_.num_heads;
  std::size_t dh = config_.hidden_size / heads;
  auto q = add(matmul(x, layer.wq), layer.bq);
  auto k = add(matmul(x, layer.wk), layer.bk);
  auto v = add(matmul(x, layer.wv), layer.bv);
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  NodePtr ctx;
  for (std::size_t hd = 0; hd < heads; ++hd) {
    auto qh = slice_cols(q, hd * dh, dh);
    auto kh = slice_cols(k, hd * dh, dh);
    auto vh = slice_cols(v, hd * dh, dh);
    auto attn = softmax(scale(matmul_nt(qh, kh), inv_sqrt));
    auto head = matmul(attn, vh);
    ctx = hd == 0 ? head : concat_cols(ctx, head);
  }
  auto out = add(matmul(ctx, layer.wo), layer.bo);
  if (training) out = dropout(out, config_.dropout, *dropout_rng, true);
  return out;
}

MlmModel::Forward MlmModel::forward(std::span<const std::size_t> token_ids, bool training,
                                    RngStream* dropout_rng) {
  if (token_ids.empty()) throw std::invalid_argument("forward: empty input");
  if (token_ids.size() > config_.max_seq_len) {
    throw std::invalid_argument("forward: input length " + std::to_string(token_ids.size()) +
                                " exceeds max_seq_len " + std::to_string(config_.max_seq_len));
  }
  if (training && dropout_rng == nullptr) {
    throw std::invalid_argument("forward: training mode needs a dropout RNG");
  }
  std::size_t n = token_ids.size();
  std::vector<std::size_t> ids(token_ids.begin(), token_ids.end());
  std::vector<std::size_t> positions(n);
  for (std::size_t i = 0; i < n; ++i) positions[i] = i;

  auto x = add(embedding_lookup(tok_emb_, ids), take_rows(pos_emb_, positions));
  if (training) x = dropout(x, config_.dropout, *dropout_rng, true);
  for (const Layer& layer : layers_) {
    auto normed = layer_norm(x, layer.ln1_gain, layer.ln1_bias);
    x = add(x, attention(layer, normed, training, dropout_rng));
    auto normed2 = layer_norm(x, layer.ln2_gain, layer.ln2_bias);
    auto ff = add(matmul(gelu(add(matmul(normed2, layer.w1), layer.b1)), layer.w2), layer.b2);
    if (training) ff = dropout(ff, config_.dropout, *dropout_rng, true);
    x = add(x, ff);
  }
  Forward fwd;
  fwd.hidden = layer_norm(x, ln_f_gain_, ln_f_bias_);
  fwd.logits = add(matmul(fwd.hidden, out_w_), out_b_);
  return fwd;
}

NodePtr MlmModel::masked_nll(const Forward& fwd, std::span<const std::size_t> positions,
                             std::span<const std::size_t> ground_truth,
                             Reduction reduction) const {
  if (positions.empty()) throw std::invalid_argument("masked_nll: empty masked set");
  if (positions.size() != ground_truth.size()) {
    throw std::invalid_argument("masked_nll: " + std::to_string(positions.size()) +
                                " positions vs " + std::to_string(ground_truth.size()) +
                                " ground-truth tokens");
  }
  auto rows = take_rows(fwd.logits, std::vector<std::size_t>(positions.begin(), positions.end()));
  return cross_entropy(rows, std::vector<std::size_t>(ground_truth.begin(), ground_truth.end()),
                       reduction);
}

std::vector<double> MlmModel::position_entropies(std::span<const std::size_t> token_ids) {
  auto fwd = forward(token_ids, false, nullptr);
  const Tensor& logits = fwd.logits->value;
  std::vector<double> entropies(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    double hi = logits.at(r, 0);
    for (std::size_t c = 1; c < logits.cols(); ++c) hi = std::max(hi, logits.at(r, c));
    double total = 0.0;
    double weighted = 0.0;
    for (std::size_t c = 0; c < logits.cols(); ++c) {
      double e = std::exp(logits.at(r, c) - hi);
      total += e;
      weighted += e * logits.at(r, c);
    }
    double lse = hi + std::log(total);
    // H = lse - E[logit] under the softmax distribution.
    entropies[r] = lse - weighted / total;
  }
  return entropies;
}

}  // namespace advmask::mlm
