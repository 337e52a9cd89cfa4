#include "advmask/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "advmask/errors.hpp"

namespace advmask::masking {

Strategy parse_strategy(const std::string& name) {
  std::string base = name;
  Strategy s;
  if (base.rfind("mix-", 0) == 0) {
    s.mixed = true;
    base = base.substr(4);
  }
  if (base == "rand" || base == "random") {
    s.kind = StrategyKind::Random;
    if (s.mixed) throw ConfigError("mix-random is not a strategy; use random");
  } else if (base == "pos") {
    s.kind = StrategyKind::TagWeighted;
  } else if (base == "ent" || base == "entropy") {
    s.kind = StrategyKind::Entropy;
  } else if (base == "adv" || base == "adversarial") {
    s.kind = StrategyKind::Adversarial;
  } else {
    throw ConfigError("unknown masking strategy '" + name +
                      "' (expected random, pos, ent, adv, mix-pos, mix-ent or mix-adv)");
  }
  return s;
}

std::string strategy_name(const Strategy& strategy) {
  std::string base;
  switch (strategy.kind) {
    case StrategyKind::Random: base = "random"; break;
    case StrategyKind::TagWeighted: base = "pos"; break;
    case StrategyKind::Entropy: base = "ent"; break;
    case StrategyKind::Adversarial: base = "adv"; break;
  }
  return strategy.mixed ? "mix-" + base : base;
}

StrategyKind effective_kind(const Strategy& strategy, RngStream& rng) {
  if (!strategy.mixed) return strategy.kind;
  return rng.uniform() < strategy.random_fraction ? StrategyKind::Random : strategy.kind;
}

std::size_t mask_budget(std::size_t n, double mask_ratio) {
  if (n == 0) throw std::invalid_argument("mask_budget: empty sentence");
  if (mask_ratio <= 0.0 || mask_ratio > 1.0) {
    throw std::invalid_argument("mask_budget: mask_ratio must be in (0, 1]");
  }
  auto k = static_cast<std::size_t>(std::floor(mask_ratio * static_cast<double>(n) + 0.5));
  return std::max<std::size_t>(1, std::min(k, n));
}

bool is_content_tag(const std::string& tag) {
  return tag == "VERB" || tag == "N" || tag == "ADJ" || tag == "PRON" || tag == "ADV";
}

MaskPlan corrupt(std::span<const std::size_t> ids, std::vector<std::size_t> subset,
                 std::size_t vocab_size, RngStream& rng) {
  if (vocab_size <= corpus::Vocabulary::kReserved) {
    throw std::invalid_argument("corrupt: vocabulary has no regular tokens");
  }
  MaskPlan plan;
  plan.subset = std::move(subset);
  plan.corrupted_ids.assign(ids.begin(), ids.end());
  plan.actions.reserve(plan.subset.size());
  plan.ground_truth.reserve(plan.subset.size());
  for (std::size_t idx : plan.subset) {
    if (idx >= ids.size()) throw std::invalid_argument("corrupt: subset index out of range");
    plan.ground_truth.push_back(ids[idx]);
    double u = rng.uniform();
    if (u < 0.8) {
      plan.actions.push_back(MaskAction::Mask);
      plan.corrupted_ids[idx] = corpus::Vocabulary::kMask;
    } else if (u < 0.9) {
      plan.actions.push_back(MaskAction::Random);
      plan.corrupted_ids[idx] = corpus::Vocabulary::kReserved +
                                rng.uniform_index(vocab_size - corpus::Vocabulary::kReserved);
    } else {
      plan.actions.push_back(MaskAction::Keep);
    }
  }
  return plan;
}

MaskPlan plan_random(const corpus::TokenSequence& sentence, double mask_ratio,
                     std::size_t vocab_size, RngStream& rng) {
  std::size_t n = sentence.ids.size();
  std::size_t k = mask_budget(n, mask_ratio);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + rng.uniform_index(n - i);
    std::swap(order[i], order[j]);
  }
  std::vector<std::size_t> subset(order.begin(), order.begin() + k);
  std::sort(subset.begin(), subset.end());
  return corrupt(sentence.ids, std::move(subset), vocab_size, rng);
}

MaskPlan plan_tag_weighted(const corpus::TokenSequence& sentence, double content_weight,
                           double other_weight, double mask_ratio, std::size_t vocab_size,
                           RngStream& rng) {
  if (content_weight <= 0.0 || other_weight <= 0.0) {
    throw std::invalid_argument("plan_tag_weighted: weights must be positive");
  }
  std::size_t n = sentence.ids.size();
  if (!sentence.has_tags()) {
    throw DataError("tag-weighted masking requires tagged input (no tags on sentence)");
  }
  std::size_t k = mask_budget(n, mask_ratio);
  std::vector<double> weights(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    weights[i] = is_content_tag(sentence.tags[i]) ? content_weight : other_weight;
    total += weights[i];
  }
  // Scale so the unconditioned expected subset size is K; the fixed-size
  // distribution conditions on |S| = K exactly.
  double scale = static_cast<double>(k) / total;
  for (double& w : weights) w = std::min(1.0, w * scale);
  subset::SubsetDistribution dist(subset::SelectionProbs(std::move(weights)), k);
  auto sample = subset::sample_hard(dist, rng);
  return corrupt(sentence.ids, std::move(sample.indices), vocab_size, rng);
}

MaskPlan plan_entropy(const corpus::TokenSequence& sentence, mlm::MlmModel& model,
                      double mask_ratio, std::size_t vocab_size, RngStream& rng) {
  std::size_t n = sentence.ids.size();
  std::size_t k = mask_budget(n, mask_ratio);
  std::vector<double> entropies = model.position_entropies(sentence.ids);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return entropies[a] > entropies[b]; });
  std::vector<std::size_t> subset(order.begin(), order.begin() + k);
  std::sort(subset.begin(), subset.end());
  return corrupt(sentence.ids, std::move(subset), vocab_size, rng);
}

AdversarialPlan plan_adversarial(const corpus::TokenSequence& sentence,
                                 adversarial::PuzzleGenerator& generator,
                                 mlm::MlmModel& model, double mask_ratio, double temperature,
                                 std::size_t vocab_size, RngStream& rng) {
  std::size_t n = sentence.ids.size();
  std::size_t k = mask_budget(n, mask_ratio);
  auto fwd = model.forward(sentence.ids, false, nullptr);
  // detach blocks the generator's gradient from reaching the MLM parameters.
  auto pi = generator.forward(nd::detach(fwd.hidden), false, nullptr);
  std::vector<double> probs(n);
  for (std::size_t i = 0; i < n; ++i) probs[i] = pi->value.at(i, 0);
  subset::SubsetDistribution dist(subset::SelectionProbs(std::move(probs)), k);
  auto sample = subset::sample_relaxed(dist, temperature, rng);
  MaskPlan plan = corrupt(sentence.ids, sample.indices, vocab_size, rng);
  return AdversarialPlan{std::move(plan), std::move(dist), std::move(sample), std::move(pi)};
}

MaskPlan plan_sentence(const corpus::TokenSequence& sentence, const Strategy& strategy,
                       mlm::MlmModel* model, adversarial::PuzzleGenerator* generator,
                       double mask_ratio, double temperature, std::size_t vocab_size,
                       RngStream& rng, std::optional<AdversarialPlan>* adv_out) {
  StrategyKind kind = effective_kind(strategy, rng);
  switch (kind) {
    case StrategyKind::Random:
      return plan_random(sentence, mask_ratio, vocab_size, rng);
    case StrategyKind::TagWeighted:
      return plan_tag_weighted(sentence, strategy.content_weight, strategy.other_weight,
                               mask_ratio, vocab_size, rng);
    case StrategyKind::Entropy:
      if (model == nullptr) throw ConfigError("entropy strategy needs a model");
      return plan_entropy(sentence, *model, mask_ratio, vocab_size, rng);
    case StrategyKind::Adversarial: {
      if (model == nullptr) throw ConfigError("adversarial strategy needs a model");
      if (generator == nullptr) throw ConfigError("adversarial strategy needs a generator");
      AdversarialPlan adv =
          plan_adversarial(sentence, *generator, *model, mask_ratio, temperature, vocab_size, rng);
      MaskPlan plan = adv.plan;
      if (adv_out != nullptr) *adv_out = std::move(adv);
      return plan;
    }
  }
  throw std::logic_error("plan_sentence: unreachable");
}

}  // namespace advmask::masking
