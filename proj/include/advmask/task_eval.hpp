#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "advmask/corpus.hpp"
#include "advmask/mlm.hpp"
#include "advmask/rng.hpp"
#include "advmask/tensor.hpp"

namespace advmask::task_eval {

// Fixed label ids for the IBO span scheme.
inline constexpr std::array<const char*, 3> kLabels = {"B", "I", "O"};

std::size_t label_id(const std::string& label);  // throws DataError on unknown
const char* label_name(std::size_t id);

// Linear projection from the encoder's hidden states to the three tag logits.
class TaggerHead {
 public:
  TaggerHead(std::size_t hidden_size, RngStream& init_rng);

  nd::NodePtr logits(const nd::NodePtr& hidden) const;  // n x 3

  const std::vector<nd::NodePtr>& parameters() const { return params_; }
  std::vector<std::pair<std::string, nd::NodePtr>> named_parameters() const;

 private:
  nd::NodePtr w_, b_;
  std::vector<nd::NodePtr> params_;
};

struct FinetuneConfig {
  std::size_t epochs = 3;
  std::size_t batch_size = 32;
  double learning_rate = 5e-5;
  bool full_model = true;  // false trains the head only and leaves the encoder untouched

  void validate() const;  // throws ConfigError
};

struct FinetuneResult {
  std::vector<double> epoch_losses;  // mean batch loss per epoch
};

// Tag-level cross-entropy training on labeled sentences whose ids are
// already vocabulary-mapped. Head-only mode keeps the encoder bit-identical.
FinetuneResult finetune_task(mlm::MlmModel& model, TaggerHead& head,
                             std::span<const corpus::TokenSequence> labeled,
                             const FinetuneConfig& config, std::uint64_t seed);

struct TokenPrediction {
  std::string token;
  std::string gold;
  std::string pred;
};

// Greedy per-token decoding; sentences are id-mapped through vocab, so the
// corpus needs tokens and labels only.
std::vector<TokenPrediction> predict(mlm::MlmModel& model, const TaggerHead& head,
                                     std::span<const corpus::TokenSequence> corpus,
                                     const corpus::Vocabulary& vocab);

struct TagScore {
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;  // percent
  std::size_t support = 0;                         // gold occurrences
};

struct EvalReport {
  double precision = 0.0;  // micro over {B, I}, percent
  double recall = 0.0;
  double f1 = 0.0;
  double macro_f1 = 0.0;   // mean of the B and I f1 scores
  double accuracy = 0.0;   // all three tags
  double oov_accuracy = 0.0;
  double non_oov_accuracy = 0.0;
  std::size_t token_count = 0;
  std::size_t oov_count = 0;
  std::size_t non_oov_count = 0;
  std::map<std::string, TagScore> per_tag;  // "B" and "I"
};

// Scores a prediction list; OOV status of each token is taken against the
// source-side vocabulary.
EvalReport score_predictions(std::span<const TokenPrediction> predictions,
                             const corpus::Vocabulary& source_vocab);

// predict + score in one step. model_vocab maps tokens to input ids (it is
// the vocabulary the encoder was trained with); source_vocab only decides
// which tokens count as out-of-vocabulary in the report. The two differ when
// the encoder saw target-domain text that the task training set lacks.
EvalReport evaluate(mlm::MlmModel& model, const TaggerHead& head,
                    std::span<const corpus::TokenSequence> corpus,
                    const corpus::Vocabulary& model_vocab,
                    const corpus::Vocabulary& source_vocab);

// One line per token: "token gold pred".
void write_predictions(const std::string& path, std::span<const TokenPrediction> predictions);
std::vector<TokenPrediction> read_predictions(const std::string& path);

std::string report_json(const EvalReport& report);
std::string report_table(const EvalReport& report);

}  // namespace advmask::task_eval
