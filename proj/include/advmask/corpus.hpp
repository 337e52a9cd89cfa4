#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "advmask/rng.hpp"

namespace advmask::corpus {

enum class Domain { Source, Target };

// One sentence. tokens/ids always parallel; tags and labels are either empty
// or parallel too.
struct TokenSequence {
  std::vector<std::string> tokens;
  std::vector<std::size_t> ids;
  std::vector<std::string> tags;
  std::vector<std::string> labels;  // IBO scheme: "B", "I", "O"
  Domain domain = Domain::Source;

  std::size_t size() const { return tokens.size(); }
  bool has_tags() const { return !tags.empty(); }
  bool has_labels() const { return !labels.empty(); }
};

// Whitespace-token vocabulary with fixed reserved ids. Regular ids are
// assigned by descending frequency, ties by lexicographic order, so building
// twice from the same corpus is deterministic.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kMask = 2;
  static constexpr std::size_t kCls = 3;
  static constexpr std::size_t kReserved = 4;

  Vocabulary();

  static Vocabulary build(std::span<const TokenSequence> corpus, std::size_t min_count = 1);

  std::size_t size() const { return id_to_token_.size(); }
  std::size_t id(const std::string& token) const;  // kUnk when absent
  const std::string& token(std::size_t id) const;
  bool contains(const std::string& token) const { return token_to_id_.count(token) > 0; }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, std::size_t> token_to_id_;

  void push(const std::string& token);

  friend Vocabulary load_vocab(const std::string& path);
};

void save_vocab(const std::string& path, const Vocabulary& vocab);
Vocabulary load_vocab(const std::string& path);

// Fills ids on every sequence; OOV tokens map to kUnk.
void apply_vocab(std::vector<TokenSequence>& corpus, const Vocabulary& vocab);

// JSONL interchange, one sentence object per line:
//   {"tokens": [...], "tags": [...]?, "labels": [...]?, "domain": "source"|"target"?}
// Malformed lines raise DataError with the 1-based line number. ids are NOT
// assigned here; call apply_vocab.
std::vector<TokenSequence> read_jsonl(const std::string& path);
void write_jsonl(const std::string& path, std::span<const TokenSequence> corpus);

// One epoch over an equal mixture: the larger corpus appears once, the
// smaller is oversampled (whole-corpus repeats plus a sampled remainder),
// order fully shuffled. Pointers borrow from the inputs.
std::vector<const TokenSequence*> mix_domains(const std::vector<TokenSequence>& source,
                                              const std::vector<TokenSequence>& target,
                                              RngStream& rng);

struct NgramSelection {
  std::vector<std::size_t> indices;  // selected pool positions, best first
  std::vector<double> scores;       // aligned with the pool
  bool truncated_request = false;   // top_n exceeded the pool
};

// Scores each pool sentence by mean set-precision of its 1..4-grams against
// the pooled reference n-gram sets; picks the top_n best, ties by pool order.
NgramSelection ngram_select(std::span<const TokenSequence> pool,
                            std::span<const TokenSequence> reference, std::size_t top_n);

// Add-k smoothed unigram distribution over the full vocabulary id space.
class UnigramLM {
 public:
  UnigramLM(std::span<const TokenSequence> corpus, std::size_t vocab_size,
            double smoothing = 0.5);

  double prob(std::size_t token_id) const;
  std::size_t vocab_size() const { return counts_.size(); }

 private:
  std::vector<double> counts_;
  double total_ = 0.0;
  double smoothing_;
};

// max(1 - Pr_src(w) / Pr_tgt(w), 0).
double density_ratio(const UnigramLM& source, const UnigramLM& target, std::size_t token_id);

// Windowed mean density ratio of masked-out tokens, one observation per
// training step, flushed every `window` steps.
class DensityRatioSeries {
 public:
  DensityRatioSeries(const UnigramLM& source, const UnigramLM& target, std::size_t window = 2500);

  void observe(std::span<const std::size_t> masked_token_ids);
  void flush();  // emits a partial window if any observations are pending

  const std::vector<double>& windows() const { return windows_; }
  double overall_mean() const;

 private:
  const UnigramLM& source_;
  const UnigramLM& target_;
  std::size_t window_;
  std::size_t steps_in_window_ = 0;
  double sum_ = 0.0;
  std::size_t count_ = 0;
  double total_sum_ = 0.0;
  std::size_t total_count_ = 0;
  std::vector<double> windows_;
};

std::unordered_set<std::string> load_stopwords(const std::string& path);

// Jaccard overlap of surface vocabularies after stopword removal, in percent.
double vocab_overlap(std::span<const TokenSequence> a, std::span<const TokenSequence> b,
                     const std::unordered_set<std::string>& stopwords = {});

// Synthetic domain-shift generator: a shared template grammar over word pools
// whose members are deterministically split into shared and domain-exclusive
// slices, plus optional planted tokens that occur only in the target domain
// in slots their context cannot predict.
struct SyntheticConfig {
  std::size_t source_sentences = 2000;
  std::size_t target_sentences = 2000;
  std::size_t pool_sentences = 0;

  std::size_t nouns = 40;
  std::size_t verbs = 24;
  std::size_t adjectives = 16;
  std::size_t adverbs = 10;
  std::size_t pronouns = 6;
  std::size_t determiners = 6;
  std::size_t prepositions = 8;
  std::size_t entities = 18;

  double shared_fraction = 0.3;    // of each pool, present in both domains
  double entity_span_rate = 0.35;  // sentences drawn from entity templates
  std::size_t planted_tokens = 6;
  double planted_rate = 0.25;        // target sentences carrying a planted token
  double planted_entity_rate = 0.5;  // planted token lands in an entity head

  void validate() const;  // throws ConfigError
};

struct SyntheticCorpora {
  std::vector<TokenSequence> source;
  std::vector<TokenSequence> target;
  std::vector<TokenSequence> pool;       // extra target-domain sentences
  std::vector<std::string> planted;      // surface forms of planted tokens
};

SyntheticCorpora generate_synthetic_shift(const SyntheticConfig& config, RngStream& rng);

}  // namespace advmask::corpus
