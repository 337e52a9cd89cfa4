#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <unordered_set>
#include <vector>

#include "advmask/corpus.hpp"
#include "advmask/errors.hpp"
#include "advmask/rng.hpp"
#include "doctest.h"

using namespace advmask::corpus;
using advmask::ConfigError;
using advmask::DataError;
using advmask::RngStream;

namespace {

TokenSequence sentence(std::vector<std::string> tokens, Domain domain = Domain::Source) {
  TokenSequence seq;
  seq.tokens = std::move(tokens);
  seq.domain = domain;
  return seq;
}

struct TempFile {
  std::string path;
  explicit TempFile(std::string p, const std::string& contents) : path(std::move(p)) {
    std::ofstream out(path, std::ios::trunc);
    out << contents;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("vocabulary reserves ids 0..3 and orders by frequency then spelling") {
  std::vector<TokenSequence> corpus;
  CHECK(Vocabulary::build(corpus).size() == 4);

  corpus.push_back(sentence({"pear", "apple", "pear", "apple", "pear", "fig"}));
  auto vocab = Vocabulary::build(corpus);
  CHECK(vocab.size() == 7);
  CHECK(vocab.id("pear") == 4);    // most frequent
  CHECK(vocab.id("apple") == 5);   // then by count
  CHECK(vocab.id("fig") == 6);
  CHECK(vocab.id("[MASK]") == Vocabulary::kMask);
  CHECK(vocab.token(Vocabulary::kPad) == "[PAD]");
  CHECK(vocab.id("durian") == Vocabulary::kUnk);

  // Equal counts fall back to lexicographic order.
  std::vector<TokenSequence> tied{sentence({"zeta", "alpha"})};
  auto tied_vocab = Vocabulary::build(tied);
  CHECK(tied_vocab.id("alpha") == 4);
  CHECK(tied_vocab.id("zeta") == 5);
}

TEST_CASE("apply_vocab round trips in-vocab tokens") {
  std::vector<TokenSequence> corpus{sentence({"a", "b", "a"})};
  auto vocab = Vocabulary::build(corpus);
  apply_vocab(corpus, vocab);
  for (std::size_t i = 0; i < corpus[0].size(); ++i) {
    CHECK(vocab.id(vocab.token(corpus[0].ids[i])) == corpus[0].ids[i]);
  }
  CHECK(corpus[0].ids == std::vector<std::size_t>{4, 5, 4});
}

TEST_CASE("vocabulary save/load round trip") {
  std::vector<TokenSequence> corpus{sentence({"kiwi", "lime", "kiwi"})};
  auto vocab = Vocabulary::build(corpus);
  save_vocab("vocab_rt.txt", vocab);
  auto loaded = load_vocab("vocab_rt.txt");
  CHECK(loaded.size() == vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i) CHECK(loaded.token(i) == vocab.token(i));
  std::remove("vocab_rt.txt");
}

TEST_CASE("jsonl round trip preserves fields") {
  std::vector<TokenSequence> corpus;
  auto s1 = sentence({"the", "dog", "ran"}, Domain::Source);
  s1.tags = {"DET", "N", "VERB"};
  s1.labels = {"O", "B", "O"};
  corpus.push_back(s1);
  corpus.push_back(sentence({"cats", "sleep"}, Domain::Target));

  write_jsonl("corpus_rt.jsonl", corpus);
  auto back = read_jsonl("corpus_rt.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[0].tokens == s1.tokens);
  CHECK(back[0].tags == s1.tags);
  CHECK(back[0].labels == s1.labels);
  CHECK(back[0].domain == Domain::Source);
  CHECK(back[1].domain == Domain::Target);
  CHECK_FALSE(back[1].has_tags());
  std::remove("corpus_rt.jsonl");
}

TEST_CASE("jsonl parse errors carry the line number") {
  auto expect_line2 = [](const std::string& body) {
    TempFile f("bad_corpus.jsonl", body);
    try {
      read_jsonl(f.path);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
  };
  expect_line2("{\"tokens\":[\"ok\"]}\nnot json at all\n");
  expect_line2("{\"tokens\":[\"ok\"]}\n{\"tokens\":[]}\n");
  expect_line2("{\"tokens\":[\"ok\"]}\n{\"tokens\":[\"a\"],\"tags\":[\"N\",\"N\"]}\n");
  expect_line2("{\"tokens\":[\"ok\"]}\n{\"tokens\":[\"a\"],\"domain\":\"moon\"}\n");
  expect_line2("{\"tokens\":[\"ok\"]}\n{\"notokens\":1}\n");
  CHECK_THROWS_AS(read_jsonl("missing_file.jsonl"), DataError);
}

TEST_CASE("mix_domains balances domains per epoch") {
  std::vector<TokenSequence> source;
  std::vector<TokenSequence> target;
  for (int i = 0; i < 40; ++i) source.push_back(sentence({"s"}, Domain::Source));
  for (int i = 0; i < 40; ++i) target.push_back(sentence({"t"}, Domain::Target));
  RngStream rng(1, "mix");

  SUBCASE("equal sizes: every sentence exactly once") {
    auto epoch = mix_domains(source, target, rng);
    REQUIRE(epoch.size() == 80);
    std::map<const TokenSequence*, int> seen;
    for (auto* p : epoch) ++seen[p];
    CHECK(seen.size() == 80);
    for (const auto& [p, c] : seen) CHECK(c == 1);
  }

  SUBCASE("2:1 sizes: smaller side appears exactly twice") {
    target.resize(20);
    auto epoch = mix_domains(source, target, rng);
    REQUIRE(epoch.size() == 80);
    std::map<const TokenSequence*, int> seen;
    for (auto* p : epoch) ++seen[p];
    for (const auto& t : target) CHECK(seen[&t] == 2);
    for (const auto& s : source) CHECK(seen[&s] == 1);
  }

  SUBCASE("window proportions stay near half") {
    source.clear();
    target.clear();
    for (int i = 0; i < 6000; ++i) source.push_back(sentence({"s"}, Domain::Source));
    for (int i = 0; i < 6000; ++i) target.push_back(sentence({"t"}, Domain::Target));
    auto epoch = mix_domains(source, target, rng);
    int target_count = 0;
    for (std::size_t i = 0; i < 10000; ++i) {
      if (epoch[i]->domain == Domain::Target) ++target_count;
    }
    double frac = target_count / 10000.0;
    CHECK(frac > 0.48);
    CHECK(frac < 0.52);
  }

  SUBCASE("empty corpora are rejected") {
    std::vector<TokenSequence> empty;
    CHECK_THROWS_AS(mix_domains(empty, target, rng), DataError);
    CHECK_THROWS_AS(mix_domains(source, empty, rng), DataError);
  }
}

namespace {

// Independent n-gram scorer: vectors and linear scans, no hashing.
double oracle_ngram_score(const TokenSequence& s, std::span<const TokenSequence> reference) {
  double acc = 0.0;
  int orders = 0;
  for (std::size_t n = 1; n <= 4; ++n) {
    if (s.size() < n) break;
    std::vector<std::vector<std::string>> grams;
    for (std::size_t i = 0; i + n <= s.size(); ++i) {
      std::vector<std::string> g(s.tokens.begin() + i, s.tokens.begin() + i + n);
      if (std::find(grams.begin(), grams.end(), g) == grams.end()) grams.push_back(g);
    }
    int hits = 0;
    for (const auto& g : grams) {
      bool found = false;
      for (const auto& ref : reference) {
        for (std::size_t i = 0; !found && i + n <= ref.size(); ++i) {
          found = std::equal(g.begin(), g.end(), ref.tokens.begin() + i);
        }
        if (found) break;
      }
      if (found) ++hits;
    }
    acc += static_cast<double>(hits) / static_cast<double>(grams.size());
    ++orders;
  }
  return orders ? acc / orders : 0.0;
}

}  // namespace

TEST_CASE("ngram_select scores and ranks like the brute-force oracle") {
  RngStream rng(12, "ngram");
  std::vector<std::string> vocab{"red", "blue", "fox", "owl", "runs", "sits", "far", "near"};
  auto random_sentence = [&](std::size_t len) {
    std::vector<std::string> toks;
    for (std::size_t i = 0; i < len; ++i) toks.push_back(vocab[rng.uniform_index(vocab.size())]);
    return sentence(std::move(toks));
  };
  std::vector<TokenSequence> reference;
  for (int i = 0; i < 30; ++i) reference.push_back(random_sentence(2 + rng.uniform_index(6)));
  std::vector<TokenSequence> pool;
  for (int i = 0; i < 100; ++i) pool.push_back(random_sentence(1 + rng.uniform_index(7)));
  pool.push_back(reference[0]);  // guaranteed perfect score
  pool.push_back(sentence({"zzz", "qqq"}));  // guaranteed zero

  auto result = ngram_select(pool, reference, 25);
  REQUIRE(result.indices.size() == 25);
  REQUIRE(result.scores.size() == pool.size());
  for (std::size_t p = 0; p < pool.size(); ++p) {
    CHECK(result.scores[p] == doctest::Approx(oracle_ngram_score(pool[p], reference)).epsilon(1e-12));
  }
  CHECK(result.scores[100] == 1.0);
  CHECK(result.scores[101] == 0.0);
  // Ranking: scores non-increasing, ties by pool order.
  for (std::size_t i = 1; i < result.indices.size(); ++i) {
    double prev = result.scores[result.indices[i - 1]];
    double cur = result.scores[result.indices[i]];
    CHECK(prev >= cur);
    if (prev == cur) CHECK(result.indices[i - 1] < result.indices[i]);
  }
}

TEST_CASE("ngram_select returns the whole pool when asked for too much") {
  std::vector<TokenSequence> pool{sentence({"a"}), sentence({"b"})};
  std::vector<TokenSequence> reference{sentence({"a"})};
  auto result = ngram_select(pool, reference, 10);
  CHECK(result.truncated_request);
  CHECK(result.indices.size() == 2);
}

TEST_CASE("unigram probabilities are smoothed and sum to one") {
  std::vector<TokenSequence> src{sentence({"a", "a", "b"})};
  std::vector<TokenSequence> tgt{sentence({"a", "b", "b"})};
  auto vocab = Vocabulary::build(src);  // a -> 4, b -> 5; size 6
  apply_vocab(src, vocab);
  apply_vocab(tgt, vocab);
  UnigramLM lm_src(src, vocab.size());
  UnigramLM lm_tgt(tgt, vocab.size());

  double total = 0.0;
  for (std::size_t id = 0; id < vocab.size(); ++id) {
    total += lm_src.prob(id);
    CHECK(lm_src.prob(id) > 0.0);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(lm_src.prob(4) == doctest::Approx(2.5 / 6.0).epsilon(1e-12));

  // b: source (1 + .5)/6, target (2 + .5)/6 -> 1 - 1.5/2.5 = 0.4
  CHECK(density_ratio(lm_src, lm_tgt, 5) == doctest::Approx(0.4).epsilon(1e-12));
  // a is denser in source: ratio clamps to zero.
  CHECK(density_ratio(lm_src, lm_tgt, 4) == 0.0);
  // Identical LMs: exactly zero everywhere.
  for (std::size_t id = 0; id < vocab.size(); ++id) {
    CHECK(density_ratio(lm_src, lm_src, id) == 0.0);
  }
}

TEST_CASE("density series windows by step count") {
  std::vector<TokenSequence> src{sentence({"a", "a", "b"})};
  std::vector<TokenSequence> tgt{sentence({"a", "b", "b"})};
  auto vocab = Vocabulary::build(src);
  apply_vocab(src, vocab);
  apply_vocab(tgt, vocab);
  UnigramLM lm_src(src, vocab.size());
  UnigramLM lm_tgt(tgt, vocab.size());

  DensityRatioSeries series(lm_src, lm_tgt, 2);
  std::vector<std::size_t> only_b{5};
  std::vector<std::size_t> only_a{4};
  series.observe(only_b);
  series.observe(only_b);  // window 1 complete: mean 0.4
  series.observe(only_a);
  series.observe(only_b);  // window 2 complete: mean 0.2
  series.observe(only_a);
  series.flush();          // partial window: mean 0.0
  REQUIRE(series.windows().size() == 3);
  CHECK(series.windows()[0] == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(series.windows()[1] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(series.windows()[2] == 0.0);
  CHECK(series.overall_mean() == doctest::Approx((0.4 * 3) / 5.0).epsilon(1e-12));
}

TEST_CASE("vocab overlap is Jaccard in percent") {
  std::vector<TokenSequence> a{sentence({"a", "b", "c"})};
  std::vector<TokenSequence> b{sentence({"b", "c", "d"})};
  CHECK(vocab_overlap(a, a) == 100.0);
  CHECK(vocab_overlap(a, b) == doctest::Approx(50.0).epsilon(1e-12));
  std::vector<TokenSequence> c{sentence({"x", "y"})};
  CHECK(vocab_overlap(a, c) == 0.0);

  std::unordered_set<std::string> stop{"a", "d"};
  CHECK(vocab_overlap(a, b, stop) == 100.0);
}

TEST_CASE("synthetic generator is deterministic and honors the shared fraction") {
  SyntheticConfig cfg;
  cfg.source_sentences = 800;
  cfg.target_sentences = 800;
  cfg.planted_tokens = 0;

  SUBCASE("same seed, same corpora") {
    RngStream r1(42, "synth");
    RngStream r2(42, "synth");
    auto c1 = generate_synthetic_shift(cfg, r1);
    auto c2 = generate_synthetic_shift(cfg, r2);
    REQUIRE(c1.source.size() == c2.source.size());
    for (std::size_t i = 0; i < c1.source.size(); ++i) {
      CHECK(c1.source[i].tokens == c2.source[i].tokens);
      CHECK(c1.source[i].tags == c2.source[i].tags);
      CHECK(c1.source[i].labels == c2.source[i].labels);
    }
  }

  SUBCASE("fully shared vocabulary") {
    cfg.shared_fraction = 1.0;
    RngStream rng(7, "synth");
    auto c = generate_synthetic_shift(cfg, rng);
    CHECK(vocab_overlap(c.source, c.target) == 100.0);
  }

  SUBCASE("fully disjoint vocabulary") {
    cfg.shared_fraction = 0.0;
    RngStream rng(7, "synth");
    auto c = generate_synthetic_shift(cfg, rng);
    CHECK(vocab_overlap(c.source, c.target) == 0.0);
  }

  SUBCASE("intermediate fraction lands near its target") {
    cfg.shared_fraction = 0.3;
    RngStream rng(7, "synth");
    auto c = generate_synthetic_shift(cfg, rng);
    double overlap = vocab_overlap(c.source, c.target);
    CHECK(overlap > 25.0);
    CHECK(overlap < 35.0);
  }
}

TEST_CASE("synthetic corpora carry tags, labels, and planted tokens only in target") {
  SyntheticConfig cfg;
  cfg.source_sentences = 600;
  cfg.target_sentences = 600;
  cfg.pool_sentences = 100;
  RngStream rng(99, "synth");
  auto c = generate_synthetic_shift(cfg, rng);
  REQUIRE(c.planted.size() == cfg.planted_tokens);
  CHECK(c.pool.size() == 100);

  std::unordered_set<std::string> planted(c.planted.begin(), c.planted.end());
  int planted_seen = 0;
  auto scan = [&](const std::vector<TokenSequence>& corpus, Domain expect, bool allow_planted) {
    for (const auto& seq : corpus) {
      REQUIRE(seq.tags.size() == seq.size());
      REQUIRE(seq.labels.size() == seq.size());
      CHECK(seq.domain == expect);
      for (std::size_t i = 0; i < seq.size(); ++i) {
        if (planted.count(seq.tokens[i])) {
          CHECK(allow_planted);
          ++planted_seen;
        }
        if (seq.labels[i] == "I") {
          REQUIRE(i > 0);
          CHECK((seq.labels[i - 1] == "B" || seq.labels[i - 1] == "I"));
        }
      }
    }
  };
  scan(c.source, Domain::Source, false);
  scan(c.target, Domain::Target, true);
  scan(c.pool, Domain::Target, true);
  CHECK(planted_seen > 50);

  // Entity spans show up at roughly the configured rate.
  int with_entity = 0;
  for (const auto& seq : c.target) {
    for (const auto& l : seq.labels) {
      if (l == "B") {
        ++with_entity;
        break;
      }
    }
  }
  CHECK(with_entity > 120);
  CHECK(with_entity < 360);

  SyntheticConfig no_entities = cfg;
  no_entities.entity_span_rate = 0.0;
  RngStream rng2(5, "synth");
  auto plain = generate_synthetic_shift(no_entities, rng2);
  for (const auto& seq : plain.target) {
    for (const auto& l : seq.labels) CHECK(l == "O");
  }
}

TEST_CASE("synthetic config validation") {
  SyntheticConfig cfg;
  cfg.shared_fraction = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = SyntheticConfig{};
  cfg.source_sentences = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = SyntheticConfig{};
  cfg.pronouns = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_NOTHROW(SyntheticConfig{}.validate());
}
