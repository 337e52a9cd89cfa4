#include "advmask/task_eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "advmask/errors.hpp"
#include "advmask/optim.hpp"
#include "json.hpp"

namespace advmask::task_eval {

using namespace advmask::nd;

std::size_t label_id(const std::string& label) {
  for (std::size_t i = 0; i < kLabels.size(); ++i) {
    if (label == kLabels[i]) return i;
  }
  throw DataError("unknown span label '" + label + "' (expected B, I or O)");
}

const char* label_name(std::size_t id) {
  if (id >= kLabels.size()) throw std::invalid_argument("label id out of range");
  return kLabels[id];
}

TaggerHead::TaggerHead(std::size_t hidden_size, RngStream& init_rng) {
  if (hidden_size == 0) throw ConfigError("tagger head needs a positive hidden size");
  w_ = leaf(randn(hidden_size, kLabels.size(), 0.02, init_rng));
  b_ = leaf(Tensor(1, kLabels.size()));
  params_ = {w_, b_};
}

NodePtr TaggerHead::logits(const NodePtr& hidden) const { return add(matmul(hidden, w_), b_); }

std::vector<std::pair<std::string, NodePtr>> TaggerHead::named_parameters() const {
  return {{"head.w", w_}, {"head.b", b_}};
}

void FinetuneConfig::validate() const {
  if (batch_size == 0) throw ConfigError("finetune batch_size must be at least 1");
  if (learning_rate <= 0.0) throw ConfigError("finetune learning rate must be positive");
}

namespace {

void require_trainable(const corpus::TokenSequence& seq, std::size_t index) {
  std::string where = "sentence " + std::to_string(index);
  if (!seq.has_labels() || seq.labels.size() != seq.tokens.size()) {
    throw DataError("fine-tuning needs span labels on every sentence (" + where + ")");
  }
  if (seq.ids.size() != seq.tokens.size()) {
    throw DataError("fine-tuning needs id-mapped sentences; apply a vocabulary first (" + where +
                    ")");
  }
}

}  // namespace

FinetuneResult finetune_task(mlm::MlmModel& model, TaggerHead& head,
                             std::span<const corpus::TokenSequence> labeled,
                             const FinetuneConfig& config, std::uint64_t seed) {
  config.validate();
  if (labeled.empty()) throw DataError("finetune_task: empty corpus");
  for (std::size_t i = 0; i < labeled.size(); ++i) require_trainable(labeled[i], i);

  std::vector<NodePtr> params;
  if (config.full_model) {
    params = model.parameters();
  }
  for (const auto& p : head.parameters()) params.push_back(p);
  Adam opt(params, {.learning_rate = config.learning_rate});

  RngStream order_rng(seed, "order");
  RngStream dropout_rng(seed, "dropout");
  std::vector<std::size_t> order(labeled.size());
  std::iota(order.begin(), order.end(), 0);

  FinetuneResult result;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    order_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::size_t stop = std::min(order.size(), start + config.batch_size);
      NodePtr total;
      for (std::size_t b = start; b < stop; ++b) {
        const corpus::TokenSequence& seq = labeled[order[b]];
        auto fwd = model.forward(seq.ids, config.full_model,
                                 config.full_model ? &dropout_rng : nullptr);
        std::vector<std::size_t> targets;
        targets.reserve(seq.labels.size());
        for (const std::string& label : seq.labels) targets.push_back(label_id(label));
        auto loss = cross_entropy(head.logits(fwd.hidden), targets, Reduction::Mean);
        total = total == nullptr ? loss : add(total, loss);
      }
      auto batch_loss = scale(total, 1.0 / static_cast<double>(stop - start));
      double loss_value = batch_loss->value.item();
      if (!std::isfinite(loss_value)) {
        throw NumericError("fine-tuning diverged in epoch " + std::to_string(epoch + 1));
      }
      opt.zero_grad();
      backward(batch_loss);
      clip_global_norm(params, 1.0);
      opt.step();
      epoch_loss += loss_value;
      ++batches;
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(batches));
  }
  return result;
}

std::vector<TokenPrediction> predict(mlm::MlmModel& model, const TaggerHead& head,
                                     std::span<const corpus::TokenSequence> corpus,
                                     const corpus::Vocabulary& vocab) {
  std::vector<TokenPrediction> out;
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    const corpus::TokenSequence& seq = corpus[s];
    if (!seq.has_labels() || seq.labels.size() != seq.tokens.size()) {
      throw DataError("prediction needs gold labels for scoring (sentence " + std::to_string(s) +
                      ")");
    }
    std::vector<std::size_t> ids;
    ids.reserve(seq.tokens.size());
    for (const std::string& token : seq.tokens) ids.push_back(vocab.id(token));
    auto fwd = model.forward(ids, false, nullptr);
    auto logits = head.logits(fwd.hidden);
    for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < kLabels.size(); ++c) {
        if (logits->value.at(i, c) > logits->value.at(i, best)) best = c;
      }
      out.push_back({seq.tokens[i], seq.labels[i], label_name(best)});
    }
  }
  return out;
}

namespace {

double percent(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

double harmonic_f1(double precision, double recall) {
  if (precision <= 0.0 || recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

EvalReport score_predictions(std::span<const TokenPrediction> predictions,
                             const corpus::Vocabulary& source_vocab) {
  EvalReport report;
  report.per_tag["B"] = {};
  report.per_tag["I"] = {};
  std::size_t correct = 0, oov_correct = 0, non_oov_correct = 0;

  for (const TokenPrediction& p : predictions) {
    label_id(p.gold);  // validate both labels
    label_id(p.pred);
    ++report.token_count;
    bool hit = p.gold == p.pred;
    if (hit) ++correct;
    if (source_vocab.contains(p.token)) {
      ++report.non_oov_count;
      if (hit) ++non_oov_correct;
    } else {
      ++report.oov_count;
      if (hit) ++oov_correct;
    }
    for (auto& [tag, score] : report.per_tag) {
      bool gold_is = p.gold == tag;
      bool pred_is = p.pred == tag;
      if (gold_is && pred_is) ++score.tp;
      if (!gold_is && pred_is) ++score.fp;
      if (gold_is && !pred_is) ++score.fn;
    }
  }

  std::size_t tp = 0, fp = 0, fn = 0;
  for (auto& [tag, score] : report.per_tag) {
    score.support = score.tp + score.fn;
    score.precision = percent(score.tp, score.tp + score.fp);
    score.recall = percent(score.tp, score.tp + score.fn);
    score.f1 = harmonic_f1(score.precision, score.recall);
    tp += score.tp;
    fp += score.fp;
    fn += score.fn;
  }
  report.precision = percent(tp, tp + fp);
  report.recall = percent(tp, tp + fn);
  report.f1 = harmonic_f1(report.precision, report.recall);
  report.macro_f1 = (report.per_tag["B"].f1 + report.per_tag["I"].f1) / 2.0;
  report.accuracy = percent(correct, report.token_count);
  report.oov_accuracy = percent(oov_correct, report.oov_count);
  report.non_oov_accuracy = percent(non_oov_correct, report.non_oov_count);
  return report;
}

EvalReport evaluate(mlm::MlmModel& model, const TaggerHead& head,
                    std::span<const corpus::TokenSequence> corpus,
                    const corpus::Vocabulary& model_vocab,
                    const corpus::Vocabulary& source_vocab) {
  return score_predictions(predict(model, head, corpus, model_vocab), source_vocab);
}

void write_predictions(const std::string& path, std::span<const TokenPrediction> predictions) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write predictions file: " + path);
  for (const TokenPrediction& p : predictions) {
    out << p.token << ' ' << p.gold << ' ' << p.pred << '\n';
  }
  if (!out) throw DataError("failed writing predictions file: " + path);
}

std::vector<TokenPrediction> read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read predictions file: " + path);
  std::vector<TokenPrediction> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    TokenPrediction p;
    std::string extra;
    if (!(ss >> p.token >> p.gold >> p.pred) || (ss >> extra)) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected exactly 'token gold pred'");
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::string report_json(const EvalReport& report) {
  nlohmann::json tags;
  for (const auto& [tag, score] : report.per_tag) {
    tags[tag] = {{"tp", score.tp},
                 {"fp", score.fp},
                 {"fn", score.fn},
                 {"precision", score.precision},
                 {"recall", score.recall},
                 {"f1", score.f1},
                 {"support", score.support}};
  }
  nlohmann::json j = {{"precision", report.precision},
                      {"recall", report.recall},
                      {"f1", report.f1},
                      {"macro_f1", report.macro_f1},
                      {"accuracy", report.accuracy},
                      {"oov_accuracy", report.oov_accuracy},
                      {"non_oov_accuracy", report.non_oov_accuracy},
                      {"token_count", report.token_count},
                      {"oov_count", report.oov_count},
                      {"non_oov_count", report.non_oov_count},
                      {"per_tag", tags}};
  return j.dump(2);
}

std::string report_table(const EvalReport& report) {
  char buf[256];
  std::string out;
  out += "tag  precision  recall     f1         support\n";
  for (const auto& [tag, score] : report.per_tag) {
    std::snprintf(buf, sizeof buf, "%-4s %9.2f  %9.2f  %9.2f  %7zu\n", tag.c_str(),
                  score.precision, score.recall, score.f1, score.support);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "micro %8.2f  %9.2f  %9.2f  %7zu\n", report.precision,
                report.recall, report.f1, report.per_tag.at("B").support +
                report.per_tag.at("I").support);
  out += buf;
  std::snprintf(buf, sizeof buf, "macro f1 %.2f\n", report.macro_f1);
  out += buf;
  std::snprintf(buf, sizeof buf,
                "accuracy %.2f (oov %.2f over %zu, non-oov %.2f over %zu, total %zu)\n",
                report.accuracy, report.oov_accuracy, report.oov_count, report.non_oov_accuracy,
                report.non_oov_count, report.token_count);
  out += buf;
  return out;
}

}  // namespace advmask::task_eval
