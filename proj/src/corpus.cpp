#include "advmask/corpus.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <iostream>
#include <map>
#include <stdexcept>
#include <utility>

#include "advmask/errors.hpp"
#include "json.hpp"

namespace advmask::corpus {

using nlohmann::json;

Vocabulary::Vocabulary() {
  push("[PAD]");
  push("[UNK]");
  push("[MASK]");
  push("[CLS]");
}

void Vocabulary::push(const std::string& token) {
  token_to_id_.emplace(token, id_to_token_.size());
  id_to_token_.push_back(token);
}

Vocabulary Vocabulary::build(std::span<const TokenSequence> corpus, std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  for (const auto& seq : corpus) {
    for (const auto& tok : seq.tokens) ++counts[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> entries(counts.begin(), counts.end());
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary vocab;
  for (const auto& [token, count] : entries) {
    if (count < min_count) continue;
    if (vocab.token_to_id_.count(token)) continue;  // reserved surface form in the data
    vocab.push(token);
  }
  return vocab;
}

std::size_t Vocabulary::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(std::size_t id) const {
  if (id >= id_to_token_.size()) {
    throw std::invalid_argument("Vocabulary: id " + std::to_string(id) + " out of range");
  }
  return id_to_token_[id];
}

void save_vocab(const std::string& path, const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open vocabulary for writing: " + path);
  for (std::size_t i = Vocabulary::kReserved; i < vocab.size(); ++i) {
    out << vocab.token(i) << '\n';
  }
  if (!out) throw DataError("write failed for vocabulary: " + path);
}

Vocabulary load_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary: " + path);
  Vocabulary vocab;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      throw DataError(path + ":" + std::to_string(lineno) + ": empty vocabulary entry");
    }
    if (vocab.contains(line)) {
      throw DataError(path + ":" + std::to_string(lineno) + ": duplicate token '" + line + "'");
    }
    vocab.push(line);
  }
  return vocab;
}

void apply_vocab(std::vector<TokenSequence>& corpus, const Vocabulary& vocab) {
  for (auto& seq : corpus) {
    seq.ids.resize(seq.tokens.size());
    for (std::size_t i = 0; i < seq.tokens.size(); ++i) seq.ids[i] = vocab.id(seq.tokens[i]);
  }
}

namespace {

[[noreturn]] void line_error(const std::string& path, std::size_t lineno, const std::string& what) {
  throw DataError(path + ":" + std::to_string(lineno) + ": " + what);
}

std::vector<std::string> string_array(const json& j, const char* field, const std::string& path,
                                      std::size_t lineno) {
  if (!j.is_array()) line_error(path, lineno, std::string(field) + " must be an array");
  std::vector<std::string> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_string()) line_error(path, lineno, std::string(field) + " must hold strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace

std::vector<TokenSequence> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus: " + path);
  std::vector<TokenSequence> corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      line_error(path, lineno, e.what());
    }
    if (!j.is_object() || !j.contains("tokens")) {
      line_error(path, lineno, "expected an object with a tokens field");
    }
    TokenSequence seq;
    seq.tokens = string_array(j["tokens"], "tokens", path, lineno);
    if (seq.tokens.empty()) line_error(path, lineno, "empty sentence");
    if (j.contains("tags")) {
      seq.tags = string_array(j["tags"], "tags", path, lineno);
      if (seq.tags.size() != seq.tokens.size()) {
        line_error(path, lineno, "tags length " + std::to_string(seq.tags.size()) +
                                     " != tokens length " + std::to_string(seq.tokens.size()));
      }
    }
    if (j.contains("labels")) {
      seq.labels = string_array(j["labels"], "labels", path, lineno);
      if (seq.labels.size() != seq.tokens.size()) {
        line_error(path, lineno, "labels length " + std::to_string(seq.labels.size()) +
                                     " != tokens length " + std::to_string(seq.tokens.size()));
      }
    }
    if (j.contains("domain")) {
      const auto& d = j["domain"];
      if (!d.is_string() || (d != "source" && d != "target")) {
        line_error(path, lineno, "domain must be \"source\" or \"target\"");
      }
      seq.domain = d == "source" ? Domain::Source : Domain::Target;
    }
    corpus.push_back(std::move(seq));
  }
  return corpus;
}

void write_jsonl(const std::string& path, std::span<const TokenSequence> corpus) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open corpus for writing: " + path);
  for (const auto& seq : corpus) {
    json j;
    j["tokens"] = seq.tokens;
    if (seq.has_tags()) j["tags"] = seq.tags;
    if (seq.has_labels()) j["labels"] = seq.labels;
    j["domain"] = seq.domain == Domain::Source ? "source" : "target";
    out << j.dump() << '\n';
  }
  if (!out) throw DataError("write failed for corpus: " + path);
}

std::vector<const TokenSequence*> mix_domains(const std::vector<TokenSequence>& source,
                                              const std::vector<TokenSequence>& target,
                                              RngStream& rng) {
  if (source.empty()) throw DataError("mix_domains: empty source corpus");
  if (target.empty()) throw DataError("mix_domains: empty target corpus");
  const auto& big = source.size() >= target.size() ? source : target;
  const auto& small = source.size() >= target.size() ? target : source;
  std::vector<const TokenSequence*> out;
  out.reserve(2 * big.size());
  for (const auto& seq : big) out.push_back(&seq);
  std::size_t repeats = big.size() / small.size();
  std::size_t remainder = big.size() % small.size();
  for (std::size_t r = 0; r < repeats; ++r) {
    for (const auto& seq : small) out.push_back(&seq);
  }
  if (remainder > 0) {
    std::vector<std::size_t> order(small.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    for (std::size_t i = 0; i < remainder; ++i) out.push_back(&small[order[i]]);
  }
  rng.shuffle(out);
  return out;
}

namespace {

constexpr std::size_t kMaxGram = 4;

std::string join_gram(std::span<const std::string> tokens, std::size_t first, std::size_t n) {
  std::string key;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) key.push_back('\x1f');
    key += tokens[first + i];
  }
  return key;
}

}  // namespace

NgramSelection ngram_select(std::span<const TokenSequence> pool,
                            std::span<const TokenSequence> reference, std::size_t top_n) {
  if (pool.empty()) throw DataError("ngram_select: empty pool");
  if (reference.empty()) throw DataError("ngram_select: empty reference");

  std::array<std::unordered_set<std::string>, kMaxGram> ref_sets;
  for (const auto& seq : reference) {
    for (std::size_t n = 1; n <= kMaxGram; ++n) {
      if (seq.size() < n) break;
      for (std::size_t i = 0; i + n <= seq.size(); ++i) {
        ref_sets[n - 1].insert(join_gram(seq.tokens, i, n));
      }
    }
  }

  NgramSelection result;
  result.scores.resize(pool.size(), 0.0);
  for (std::size_t p = 0; p < pool.size(); ++p) {
    const auto& seq = pool[p];
    double acc = 0.0;
    std::size_t orders = 0;
    for (std::size_t n = 1; n <= kMaxGram; ++n) {
      if (seq.size() < n) break;
      std::unordered_set<std::string> grams;
      for (std::size_t i = 0; i + n <= seq.size(); ++i) {
        grams.insert(join_gram(seq.tokens, i, n));
      }
      std::size_t hits = 0;
      for (const auto& g : grams) {
        if (ref_sets[n - 1].count(g)) ++hits;
      }
      acc += static_cast<double>(hits) / static_cast<double>(grams.size());
      ++orders;
    }
    result.scores[p] = orders > 0 ? acc / static_cast<double>(orders) : 0.0;
  }

  std::size_t take = top_n;
  if (top_n > pool.size()) {
    std::cerr << "ngram_select: requested " << top_n << " of a pool of " << pool.size()
              << "; returning the whole pool\n";
    result.truncated_request = true;
    take = pool.size();
  }
  result.indices.resize(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) result.indices[i] = i;
  std::stable_sort(result.indices.begin(), result.indices.end(),
                   [&](std::size_t a, std::size_t b) { return result.scores[a] > result.scores[b]; });
  result.indices.resize(take);
  return result;
}

UnigramLM::UnigramLM(std::span<const TokenSequence> corpus, std::size_t vocab_size,
                     double smoothing)
    : counts_(vocab_size, 0.0), smoothing_(smoothing) {
  if (vocab_size == 0) throw std::invalid_argument("UnigramLM: empty vocabulary");
  if (smoothing <= 0.0) throw std::invalid_argument("UnigramLM: smoothing must be positive");
  for (const auto& seq : corpus) {
    if (seq.ids.size() != seq.tokens.size()) {
      throw DataError("UnigramLM: corpus has unassigned ids; run apply_vocab first");
    }
    for (std::size_t id : seq.ids) {
      if (id >= vocab_size) throw DataError("UnigramLM: token id outside vocabulary");
      counts_[id] += 1.0;
      total_ += 1.0;
    }
  }
}

double UnigramLM::prob(std::size_t token_id) const {
  if (token_id >= counts_.size()) {
    throw std::invalid_argument("UnigramLM: id out of range");
  }
  double denom = total_ + smoothing_ * static_cast<double>(counts_.size());
  return (counts_[token_id] + smoothing_) / denom;
}

double density_ratio(const UnigramLM& source, const UnigramLM& target, std::size_t token_id) {
  double ratio = source.prob(token_id) / target.prob(token_id);
  return std::max(1.0 - ratio, 0.0);
}

DensityRatioSeries::DensityRatioSeries(const UnigramLM& source, const UnigramLM& target,
                                       std::size_t window)
    : source_(source), target_(target), window_(window) {
  if (window == 0) throw std::invalid_argument("DensityRatioSeries: window must be positive");
}

void DensityRatioSeries::observe(std::span<const std::size_t> masked_token_ids) {
  for (std::size_t id : masked_token_ids) {
    double r = density_ratio(source_, target_, id);
    sum_ += r;
    total_sum_ += r;
    ++count_;
    ++total_count_;
  }
  ++steps_in_window_;
  if (steps_in_window_ >= window_) flush();
}

void DensityRatioSeries::flush() {
  if (steps_in_window_ == 0) return;
  windows_.push_back(count_ > 0 ? sum_ / static_cast<double>(count_) : 0.0);
  steps_in_window_ = 0;
  sum_ = 0.0;
  count_ = 0;
}

double DensityRatioSeries::overall_mean() const {
  return total_count_ > 0 ? total_sum_ / static_cast<double>(total_count_) : 0.0;
}

std::unordered_set<std::string> load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open stopword list: " + path);
  std::unordered_set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.insert(line);
  }
  return out;
}

double vocab_overlap(std::span<const TokenSequence> a, std::span<const TokenSequence> b,
                     const std::unordered_set<std::string>& stopwords) {
  auto collect = [&stopwords](std::span<const TokenSequence> corpus) {
    std::unordered_set<std::string> vocab;
    for (const auto& seq : corpus) {
      for (const auto& tok : seq.tokens) {
        if (!stopwords.count(tok)) vocab.insert(tok);
      }
    }
    return vocab;
  };
  auto va = collect(a);
  auto vb = collect(b);
  std::size_t shared = 0;
  for (const auto& tok : va) {
    if (vb.count(tok)) ++shared;
  }
  std::size_t unions = va.size() + vb.size() - shared;
  if (unions == 0) return 100.0;
  return 100.0 * static_cast<double>(shared) / static_cast<double>(unions);
}

namespace {

enum class Slot { Det, Adj, Noun, Verb, Prep, Adv, Pron, Entity };

struct PoolSplit {
  std::vector<std::string> source;  // shared + source-exclusive
  std::vector<std::string> target;  // shared + target-exclusive
};

// Deterministic split: the first round(f * size) words of a pool are shared,
// the remainder is halved into domain-exclusive slices.
PoolSplit split_pool(const std::string& prefix, std::size_t size, double shared_fraction) {
  std::vector<std::string> words(size);
  for (std::size_t i = 0; i < size; ++i) {
    std::string num = std::to_string(i);
    if (num.size() < 2) num = "0" + num;
    words[i] = prefix + num;
  }
  auto shared = static_cast<std::size_t>(std::llround(shared_fraction * static_cast<double>(size)));
  shared = std::min(shared, size);
  std::size_t excl = size - shared;
  std::size_t src_excl = (excl + 1) / 2;
  PoolSplit out;
  for (std::size_t i = 0; i < shared; ++i) {
    out.source.push_back(words[i]);
    out.target.push_back(words[i]);
  }
  for (std::size_t i = shared; i < shared + src_excl; ++i) out.source.push_back(words[i]);
  for (std::size_t i = shared + src_excl; i < size; ++i) out.target.push_back(words[i]);
  return out;
}

const char* slot_tag(Slot s) {
  switch (s) {
    case Slot::Det: return "DET";
    case Slot::Adj: return "ADJ";
    case Slot::Noun: return "N";
    case Slot::Verb: return "VERB";
    case Slot::Prep: return "PREP";
    case Slot::Adv: return "ADV";
    case Slot::Pron: return "PRON";
    case Slot::Entity: return "N";
  }
  return "N";
}

using Template = std::vector<Slot>;

const std::vector<Template>& plain_templates() {
  static const std::vector<Template> t{
      {Slot::Det, Slot::Adj, Slot::Noun, Slot::Verb, Slot::Det, Slot::Noun},
      {Slot::Det, Slot::Noun, Slot::Verb, Slot::Prep, Slot::Det, Slot::Noun},
      {Slot::Pron, Slot::Verb, Slot::Det, Slot::Adj, Slot::Noun},
      {Slot::Det, Slot::Noun, Slot::Verb, Slot::Adv},
      {Slot::Det, Slot::Adj, Slot::Noun, Slot::Verb, Slot::Prep, Slot::Det, Slot::Adj, Slot::Noun},
      {Slot::Pron, Slot::Adv, Slot::Verb, Slot::Det, Slot::Noun},
  };
  return t;
}

const std::vector<Template>& entity_templates() {
  static const std::vector<Template> t{
      {Slot::Entity, Slot::Verb, Slot::Det, Slot::Noun},
      {Slot::Det, Slot::Noun, Slot::Prep, Slot::Entity, Slot::Verb, Slot::Adv},
      {Slot::Entity, Slot::Verb, Slot::Prep, Slot::Det, Slot::Adj, Slot::Noun},
      {Slot::Pron, Slot::Verb, Slot::Entity},
  };
  return t;
}

struct DomainLexicon {
  const std::vector<std::string>* det;
  const std::vector<std::string>* adj;
  const std::vector<std::string>* noun;
  const std::vector<std::string>* verb;
  const std::vector<std::string>* prep;
  const std::vector<std::string>* adv;
  const std::vector<std::string>* pron;
  const std::vector<std::string>* entity;

  const std::vector<std::string>& pool(Slot s) const {
    switch (s) {
      case Slot::Det: return *det;
      case Slot::Adj: return *adj;
      case Slot::Noun: return *noun;
      case Slot::Verb: return *verb;
      case Slot::Prep: return *prep;
      case Slot::Adv: return *adv;
      case Slot::Pron: return *pron;
      case Slot::Entity: return *entity;
    }
    return *noun;
  }
};

const std::string& pick(const std::vector<std::string>& pool, RngStream& rng) {
  return pool[rng.uniform_index(pool.size())];
}

TokenSequence make_sentence(const DomainLexicon& lex, Domain domain, double entity_span_rate,
                            RngStream& rng) {
  bool with_entity = rng.bernoulli(entity_span_rate);
  const auto& templates = with_entity ? entity_templates() : plain_templates();
  const Template& tpl = templates[rng.uniform_index(templates.size())];
  TokenSequence seq;
  seq.domain = domain;
  for (Slot slot : tpl) {
    if (slot == Slot::Entity) {
      std::size_t span = 1 + rng.uniform_index(3);
      for (std::size_t i = 0; i < span; ++i) {
        seq.tokens.push_back(pick(lex.pool(Slot::Entity), rng));
        seq.tags.emplace_back(slot_tag(Slot::Entity));
        seq.labels.emplace_back(i == 0 ? "B" : "I");
      }
    } else {
      seq.tokens.push_back(pick(lex.pool(slot), rng));
      seq.tags.emplace_back(slot_tag(slot));
      seq.labels.emplace_back("O");
    }
  }
  return seq;
}

// Swaps a planted token into a slot whose filler the surrounding template
// cannot pin down: either an entity head (stays B-labeled) or the final noun.
void inject_planted(TokenSequence& seq, const std::vector<std::string>& planted,
                    double planted_entity_rate, RngStream& rng) {
  const std::string& word = planted[rng.uniform_index(planted.size())];
  std::size_t entity_head = seq.size();
  std::size_t last_noun = seq.size();
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (seq.labels[i] == "B" && entity_head == seq.size()) entity_head = i;
    if (seq.tags[i] == "N" && seq.labels[i] == "O") last_noun = i;
  }
  bool prefer_entity = rng.bernoulli(planted_entity_rate);
  std::size_t pos;
  if (prefer_entity && entity_head < seq.size()) {
    pos = entity_head;
  } else if (last_noun < seq.size()) {
    pos = last_noun;
  } else if (entity_head < seq.size()) {
    pos = entity_head;
  } else {
    return;
  }
  seq.tokens[pos] = word;
}

}  // namespace

void SyntheticConfig::validate() const {
  auto fraction = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!fraction(shared_fraction)) throw ConfigError("shared_fraction must be in [0, 1]");
  if (!fraction(entity_span_rate)) throw ConfigError("entity_span_rate must be in [0, 1]");
  if (!fraction(planted_rate)) throw ConfigError("planted_rate must be in [0, 1]");
  if (!fraction(planted_entity_rate)) throw ConfigError("planted_entity_rate must be in [0, 1]");
  if (source_sentences == 0) throw ConfigError("source_sentences must be positive");
  if (target_sentences == 0) throw ConfigError("target_sentences must be positive");
  for (auto [name, size] : {std::pair{"nouns", nouns}, {"verbs", verbs},
                            {"adjectives", adjectives}, {"adverbs", adverbs},
                            {"pronouns", pronouns}, {"determiners", determiners},
                            {"prepositions", prepositions}, {"entities", entities}}) {
    if (size < 2) throw ConfigError(std::string(name) + " pool needs at least 2 words");
  }
}

SyntheticCorpora generate_synthetic_shift(const SyntheticConfig& config, RngStream& rng) {
  config.validate();
  auto det = split_pool("det", config.determiners, config.shared_fraction);
  auto adj = split_pool("adj", config.adjectives, config.shared_fraction);
  auto noun = split_pool("noun", config.nouns, config.shared_fraction);
  auto verb = split_pool("verb", config.verbs, config.shared_fraction);
  auto prep = split_pool("prep", config.prepositions, config.shared_fraction);
  auto adv = split_pool("adv", config.adverbs, config.shared_fraction);
  auto pron = split_pool("pron", config.pronouns, config.shared_fraction);
  auto entity = split_pool("ent", config.entities, config.shared_fraction);

  DomainLexicon src{&det.source, &adj.source, &noun.source, &verb.source,
                    &prep.source, &adv.source, &pron.source, &entity.source};
  DomainLexicon tgt{&det.target, &adj.target, &noun.target, &verb.target,
                    &prep.target, &adv.target, &pron.target, &entity.target};

  SyntheticCorpora out;
  for (std::size_t i = 0; i < config.planted_tokens; ++i) {
    std::string num = std::to_string(i);
    if (num.size() < 2) num = "0" + num;
    out.planted.push_back("planted" + num);
  }

  for (std::size_t i = 0; i < config.source_sentences; ++i) {
    out.source.push_back(make_sentence(src, Domain::Source, config.entity_span_rate, rng));
  }
  auto make_target = [&] {
    TokenSequence seq = make_sentence(tgt, Domain::Target, config.entity_span_rate, rng);
    if (!out.planted.empty() && rng.bernoulli(config.planted_rate)) {
      inject_planted(seq, out.planted, config.planted_entity_rate, rng);
    }
    return seq;
  };
  for (std::size_t i = 0; i < config.target_sentences; ++i) out.target.push_back(make_target());
  for (std::size_t i = 0; i < config.pool_sentences; ++i) out.pool.push_back(make_target());
  return out;
}

}  // namespace advmask::corpus
