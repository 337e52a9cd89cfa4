#include "advmask/masking.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "advmask/errors.hpp"
#include "advmask/generator.hpp"
#include "advmask/mlm.hpp"
#include "advmask/rng.hpp"
#include "doctest.h"

using namespace advmask;
using namespace advmask::masking;

namespace {

corpus::TokenSequence make_sentence(std::size_t n, std::size_t first_id = 4) {
  corpus::TokenSequence seq;
  for (std::size_t i = 0; i < n; ++i) {
    seq.tokens.push_back("t" + std::to_string(i));
    seq.ids.push_back(first_id + i);
  }
  return seq;
}

mlm::MlmConfig tiny_config(std::size_t vocab = 24) {
  mlm::MlmConfig cfg;
  cfg.vocab_size = vocab;
  cfg.hidden_size = 8;
  cfg.num_layers = 1;
  cfg.num_heads = 2;
  cfg.ffn_size = 16;
  cfg.max_seq_len = 16;
  cfg.dropout = 0.0;
  return cfg;
}

}  // namespace

TEST_CASE("mask budget rounds half up with a floor of one") {
  CHECK(mask_budget(1, 0.15) == 1);
  CHECK(mask_budget(7, 0.15) == 1);   // 1.05
  CHECK(mask_budget(10, 0.15) == 2);  // 1.5 rounds up
  CHECK(mask_budget(13, 0.15) == 2);  // 1.95
  CHECK(mask_budget(20, 0.15) == 3);
  CHECK(mask_budget(3, 0.5) == 2);    // 1.5 rounds up
  CHECK(mask_budget(4, 1.0) == 4);
  CHECK_THROWS_AS(mask_budget(0, 0.15), std::invalid_argument);
  CHECK_THROWS_AS(mask_budget(5, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(mask_budget(5, 1.5), std::invalid_argument);
}

TEST_CASE("strategy names parse and round trip") {
  CHECK(parse_strategy("random").kind == StrategyKind::Random);
  CHECK(parse_strategy("rand").kind == StrategyKind::Random);
  CHECK(parse_strategy("pos").kind == StrategyKind::TagWeighted);
  CHECK(parse_strategy("ent").kind == StrategyKind::Entropy);
  CHECK(parse_strategy("entropy").kind == StrategyKind::Entropy);
  CHECK(parse_strategy("adv").kind == StrategyKind::Adversarial);
  CHECK(parse_strategy("adversarial").kind == StrategyKind::Adversarial);
  CHECK_FALSE(parse_strategy("adv").mixed);

  Strategy mix = parse_strategy("mix-adv");
  CHECK(mix.kind == StrategyKind::Adversarial);
  CHECK(mix.mixed);
  CHECK(mix.random_fraction == 0.5);
  CHECK(parse_strategy("mix-pos").kind == StrategyKind::TagWeighted);
  CHECK(parse_strategy("mix-ent").kind == StrategyKind::Entropy);

  CHECK_THROWS_AS(parse_strategy("bogus"), ConfigError);
  CHECK_THROWS_AS(parse_strategy("mix-random"), ConfigError);

  for (const char* name : {"random", "pos", "ent", "adv", "mix-pos", "mix-ent", "mix-adv"}) {
    CHECK(strategy_name(parse_strategy(name)) == name);
  }
}

TEST_CASE("mixed coin hits the random fraction") {
  Strategy mix = parse_strategy("mix-ent");
  RngStream rng(123, "mix");
  std::size_t random_count = 0;
  const std::size_t trials = 100000;
  for (std::size_t i = 0; i < trials; ++i) {
    if (effective_kind(mix, rng) == StrategyKind::Random) ++random_count;
  }
  double frac = static_cast<double>(random_count) / trials;
  CHECK(std::abs(frac - 0.5) < 0.01);

  Strategy plain = parse_strategy("ent");
  CHECK(effective_kind(plain, rng) == StrategyKind::Entropy);
}

TEST_CASE("corrupt applies the 80/10/10 rule") {
  auto seq = make_sentence(10);
  RngStream rng(7, "corrupt");
  const std::size_t vocab = 24;
  std::size_t masked = 0, randomized = 0, kept = 0, trials = 0;

  for (std::size_t rep = 0; rep < 10000; ++rep) {
    std::vector<std::size_t> subset{0, 3, 4, 6, 7, 8, 2, 5, 9, 1};
    std::sort(subset.begin(), subset.end());
    MaskPlan plan = corrupt(seq.ids, subset, vocab, rng);
    REQUIRE(plan.subset.size() == plan.actions.size());
    REQUIRE(plan.subset.size() == plan.ground_truth.size());
    for (std::size_t i = 0; i < plan.subset.size(); ++i) {
      std::size_t pos = plan.subset[i];
      ++trials;
      switch (plan.actions[i]) {
        case MaskAction::Mask:
          ++masked;
          CHECK(plan.corrupted_ids[pos] == corpus::Vocabulary::kMask);
          break;
        case MaskAction::Random:
          ++randomized;
          CHECK(plan.corrupted_ids[pos] >= corpus::Vocabulary::kReserved);
          CHECK(plan.corrupted_ids[pos] < vocab);
          break;
        case MaskAction::Keep:
          ++kept;
          CHECK(plan.corrupted_ids[pos] == seq.ids[pos]);
          break;
      }
      CHECK(plan.ground_truth[i] == seq.ids[pos]);
    }
  }
  double n = static_cast<double>(trials);
  CHECK(std::abs(masked / n - 0.8) < 0.005);
  CHECK(std::abs(randomized / n - 0.1) < 0.005);
  CHECK(std::abs(kept / n - 0.1) < 0.005);
}

TEST_CASE("corrupt leaves unselected positions untouched") {
  auto seq = make_sentence(8);
  RngStream rng(11, "corrupt");
  for (int rep = 0; rep < 200; ++rep) {
    MaskPlan plan = corrupt(seq.ids, {1, 4}, 24, rng);
    for (std::size_t pos = 0; pos < seq.ids.size(); ++pos) {
      if (pos != 1 && pos != 4) CHECK(plan.corrupted_ids[pos] == seq.ids[pos]);
    }
  }
  CHECK_THROWS_AS(corrupt(seq.ids, {0}, corpus::Vocabulary::kReserved, rng),
                  std::invalid_argument);
  CHECK_THROWS_AS(corrupt(seq.ids, {99}, 24, rng), std::invalid_argument);
}

TEST_CASE("random plans have exact size and uniform marginals") {
  auto seq = make_sentence(20);
  RngStream rng(31, "mask");
  std::vector<std::size_t> hits(20, 0);
  const std::size_t trials = 100000;
  for (std::size_t t = 0; t < trials; ++t) {
    MaskPlan plan = plan_random(seq, 0.15, 24, rng);
    REQUIRE(plan.subset.size() == 3);
    CHECK(std::is_sorted(plan.subset.begin(), plan.subset.end()));
    CHECK(std::adjacent_find(plan.subset.begin(), plan.subset.end()) == plan.subset.end());
    for (std::size_t idx : plan.subset) ++hits[idx];
  }
  for (std::size_t i = 0; i < hits.size(); ++i) {
    double freq = static_cast<double>(hits[i]) / trials;
    CHECK(std::abs(freq - 0.15) < 0.005);
  }

  auto single = make_sentence(1);
  MaskPlan plan = plan_random(single, 0.15, 24, rng);
  REQUIRE(plan.subset.size() == 1);
  CHECK(plan.subset[0] == 0);
}

TEST_CASE("tag-weighted marginals match the subset distribution") {
  auto seq = make_sentence(8);
  seq.tags = {"N", "VERB", "ADJ", "ADV", "DET", "PREP", "DET", "PREP"};
  const std::size_t k = 2;       // 0.25 * 8
  const double content_w = 0.8;
  const double other_w = 0.2;

  // Reference marginals from the same scaled weights the planner uses.
  std::vector<double> pis;
  double total = 4 * content_w + 4 * other_w;
  for (std::size_t i = 0; i < 8; ++i) {
    double w = i < 4 ? content_w : other_w;
    pis.push_back(w * k / total);
  }
  subset::SubsetDistribution dist(subset::SelectionProbs(pis), k);
  std::vector<double> expected = dist.inclusion_probabilities();

  RngStream rng(41, "mask");
  std::vector<std::size_t> hits(8, 0);
  const std::size_t trials = 100000;
  for (std::size_t t = 0; t < trials; ++t) {
    MaskPlan plan = plan_tag_weighted(seq, content_w, other_w, 0.25, 24, rng);
    REQUIRE(plan.subset.size() == k);
    for (std::size_t idx : plan.subset) ++hits[idx];
  }
  for (std::size_t i = 0; i < 8; ++i) {
    double freq = static_cast<double>(hits[i]) / trials;
    CHECK(std::abs(freq - expected[i]) < 0.005);
  }
  // Content positions dominate the marginal by construction.
  CHECK(expected[0] > 4.0 * expected[7]);

  auto untagged = make_sentence(8);
  CHECK_THROWS_AS(plan_tag_weighted(untagged, content_w, other_w, 0.25, 24, rng), DataError);
}

TEST_CASE("all content tags reduce to the uniform subset distribution") {
  auto seq = make_sentence(6);
  seq.tags = {"N", "VERB", "ADJ", "PRON", "ADV", "N"};
  RngStream rng(43, "mask");
  std::vector<std::size_t> hits(6, 0);
  const std::size_t trials = 60000;
  for (std::size_t t = 0; t < trials; ++t) {
    MaskPlan plan = plan_tag_weighted(seq, 0.8, 0.2, 0.34, 24, rng);
    REQUIRE(plan.subset.size() == 2);
    for (std::size_t idx : plan.subset) ++hits[idx];
  }
  for (std::size_t hit : hits) {
    double freq = static_cast<double>(hit) / trials;
    CHECK(std::abs(freq - 2.0 / 6.0) < 0.007);
  }
}

TEST_CASE("entropy plans take the top positions deterministically") {
  RngStream init(51, "init");
  mlm::MlmModel model(tiny_config(), init);
  auto seq = make_sentence(8);
  RngStream rng(53, "mask");

  std::vector<double> entropies = model.position_entropies(seq.ids);
  std::vector<std::size_t> order(8);
  for (std::size_t i = 0; i < 8; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return entropies[a] > entropies[b]; });
  std::vector<std::size_t> expected(order.begin(), order.begin() + 2);
  std::sort(expected.begin(), expected.end());

  for (int rep = 0; rep < 5; ++rep) {
    MaskPlan plan = plan_entropy(seq, model, 0.25, 24, rng);
    CHECK(plan.subset == expected);
  }

  // The lowest-entropy position is never selected while K < n.
  std::size_t argmin = 0;
  for (std::size_t i = 1; i < 8; ++i) {
    if (entropies[i] < entropies[argmin]) argmin = i;
  }
  MaskPlan plan = plan_entropy(seq, model, 0.8, 24, rng);  // K = 6 of 8
  CHECK(std::find(plan.subset.begin(), plan.subset.end(), argmin) == plan.subset.end());
}

TEST_CASE("entropy ties break toward lower indices") {
  RngStream init(55, "init");
  mlm::MlmModel model(tiny_config(), init);
  // Zero output projection: every position has identical (uniform) logits.
  for (const auto& [name, p] : model.named_parameters()) {
    if (name == "out.w" || name == "out.b") p->value.fill(0.0);
  }
  auto seq = make_sentence(8);
  RngStream rng(57, "mask");
  MaskPlan plan = plan_entropy(seq, model, 0.25, 24, rng);
  CHECK(plan.subset == std::vector<std::size_t>{0, 1});
}

TEST_CASE("adversarial plans with a zero generator are uniform") {
  RngStream init(61, "init");
  mlm::MlmModel model(tiny_config(), init);
  adversarial::GeneratorConfig gcfg;
  gcfg.input_size = model.config().hidden_size;
  gcfg.hidden_size = 16;
  RngStream ginit(62, "init");
  adversarial::PuzzleGenerator gen(gcfg, ginit);
  gen.zero_weights();

  auto seq = make_sentence(8);
  RngStream rng(63, "mask");
  std::vector<std::size_t> hits(8, 0);
  const std::size_t trials = 20000;
  for (std::size_t t = 0; t < trials; ++t) {
    AdversarialPlan adv = plan_adversarial(seq, gen, model, 0.25, 1.0, 24, rng);
    REQUIRE(adv.plan.subset.size() == 2);
    CHECK(adv.sample.indices == adv.plan.subset);
    for (std::size_t i = 0; i < 8; ++i) CHECK(adv.pi->value.at(i, 0) == 0.5);
    for (std::size_t idx : adv.plan.subset) ++hits[idx];
  }
  for (std::size_t hit : hits) {
    double freq = static_cast<double>(hit) / trials;
    CHECK(std::abs(freq - 0.25) < 0.015);
  }
}

TEST_CASE("adversarial planning is reproducible under a fixed seed") {
  RngStream init(71, "init");
  mlm::MlmModel model(tiny_config(), init);
  adversarial::GeneratorConfig gcfg;
  gcfg.input_size = model.config().hidden_size;
  RngStream ginit(72, "init");
  adversarial::PuzzleGenerator gen(gcfg, ginit);
  auto seq = make_sentence(9);

  auto run = [&] {
    RngStream rng(73, "mask");
    std::vector<MaskPlan> plans;
    for (int i = 0; i < 5; ++i) {
      plans.push_back(plan_adversarial(seq, gen, model, 0.25, 1.0, 24, rng).plan);
    }
    return plans;
  };
  auto a = run();
  auto b = run();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].subset == b[i].subset);
    CHECK(a[i].actions == b[i].actions);
    CHECK(a[i].corrupted_ids == b[i].corrupted_ids);
  }
}

TEST_CASE("adversarial pi keeps a gradient path into the generator") {
  RngStream init(81, "init");
  mlm::MlmModel model(tiny_config(), init);
  adversarial::GeneratorConfig gcfg;
  gcfg.input_size = model.config().hidden_size;
  RngStream ginit(82, "init");
  adversarial::PuzzleGenerator gen(gcfg, ginit);
  auto seq = make_sentence(6);
  RngStream rng(83, "mask");

  AdversarialPlan adv = plan_adversarial(seq, gen, model, 0.34, 1.0, 24, rng);
  CHECK(adv.pi->requires_grad);
  CHECK_FALSE(adv.pi->inputs.empty());

  nd::Tensor seed(6, 1, 1.0);
  nd::backward_with_grad(adv.pi, seed);
  double gen_grad_mass = 0.0;
  for (const auto& p : gen.parameters()) {
    for (std::size_t r = 0; r < p->grad.rows(); ++r) {
      for (std::size_t c = 0; c < p->grad.cols(); ++c) gen_grad_mass += std::abs(p->grad.at(r, c));
    }
  }
  CHECK(gen_grad_mass > 0.0);

  // The model must stay out of the generator's gradient path.
  for (const auto& p : model.parameters()) {
    for (std::size_t r = 0; r < p->grad.rows(); ++r) {
      for (std::size_t c = 0; c < p->grad.cols(); ++c) CHECK(p->grad.at(r, c) == 0.0);
    }
  }
}

TEST_CASE("budget is identical across strategies for the same sentence") {
  RngStream init(91, "init");
  mlm::MlmModel model(tiny_config(), init);
  adversarial::GeneratorConfig gcfg;
  gcfg.input_size = model.config().hidden_size;
  RngStream ginit(92, "init");
  adversarial::PuzzleGenerator gen(gcfg, ginit);

  auto seq = make_sentence(13);
  seq.tags.assign(13, "N");
  RngStream rng(93, "mask");

  std::size_t budget = mask_budget(13, 0.15);
  CHECK(plan_random(seq, 0.15, 24, rng).subset.size() == budget);
  CHECK(plan_tag_weighted(seq, 0.8, 0.2, 0.15, 24, rng).subset.size() == budget);
  CHECK(plan_entropy(seq, model, 0.15, 24, rng).subset.size() == budget);
  CHECK(plan_adversarial(seq, gen, model, 0.15, 1.0, 24, rng).plan.subset.size() == budget);
}

TEST_CASE("plan_sentence dispatches and validates dependencies") {
  RngStream init(95, "init");
  mlm::MlmModel model(tiny_config(), init);
  auto seq = make_sentence(8);
  RngStream rng(96, "mask");

  Strategy ent = parse_strategy("ent");
  CHECK_THROWS_AS(plan_sentence(seq, ent, nullptr, nullptr, 0.15, 1.0, 24, rng), ConfigError);

  Strategy adv = parse_strategy("adv");
  CHECK_THROWS_AS(plan_sentence(seq, adv, &model, nullptr, 0.15, 1.0, 24, rng), ConfigError);

  Strategy rnd = parse_strategy("random");
  MaskPlan plan = plan_sentence(seq, rnd, nullptr, nullptr, 0.15, 1.0, 24, rng);
  CHECK(plan.subset.size() == 1);

  adversarial::GeneratorConfig gcfg;
  gcfg.input_size = model.config().hidden_size;
  RngStream ginit(97, "init");
  adversarial::PuzzleGenerator gen(gcfg, ginit);
  std::optional<AdversarialPlan> out;
  MaskPlan adv_plan = plan_sentence(seq, adv, &model, &gen, 0.15, 1.0, 24, rng, &out);
  REQUIRE(out.has_value());
  CHECK(out->plan.subset == adv_plan.subset);
}
