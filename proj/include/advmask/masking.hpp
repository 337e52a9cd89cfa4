#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "advmask/corpus.hpp"
#include "advmask/generator.hpp"
#include "advmask/mlm.hpp"
#include "advmask/rng.hpp"
#include "advmask/subset.hpp"
#include "advmask/tensor.hpp"

namespace advmask::masking {

enum class MaskAction { Mask, Random, Keep };

// One masked sentence: which positions were hidden, how each one was
// corrupted, and the original tokens needed to score the reconstruction.
struct MaskPlan {
  std::vector<std::size_t> subset;         // strictly increasing positions
  std::vector<MaskAction> actions;         // parallel to subset
  std::vector<std::size_t> ground_truth;   // original ids at subset positions
  std::vector<std::size_t> corrupted_ids;  // full sentence after corruption
};

enum class StrategyKind { Random, TagWeighted, Entropy, Adversarial };

struct Strategy {
  StrategyKind kind = StrategyKind::Random;
  bool mixed = false;            // per-sentence coin between kind and Random
  double random_fraction = 0.5;  // mixed only: share of sentences masked randomly
  double content_weight = 0.8;   // tag-weighted only
  double other_weight = 0.2;

  bool needs_model() const {
    return kind == StrategyKind::Entropy || kind == StrategyKind::Adversarial;
  }
  bool needs_generator() const { return kind == StrategyKind::Adversarial; }
};

// Accepts rand/random, pos, ent/entropy, adv/adversarial and the mix- forms
// mix-pos, mix-ent, mix-adv. Throws ConfigError otherwise.
Strategy parse_strategy(const std::string& name);
std::string strategy_name(const Strategy& strategy);

// Per-sentence coin for mixed strategies; non-mixed passes kind through.
StrategyKind effective_kind(const Strategy& strategy, RngStream& rng);

// Number of positions to hide: max(1, round-half-up(mask_ratio * n)).
std::size_t mask_budget(std::size_t n, double mask_ratio);

// Whether a POS tag counts as content for tag-weighted masking
// (VERB, N, ADJ, PRON, ADV).
bool is_content_tag(const std::string& tag);

MaskPlan plan_random(const corpus::TokenSequence& sentence, double mask_ratio,
                     std::size_t vocab_size, RngStream& rng);

// Selection weight content_weight or other_weight per tag, scaled so the
// weights sum to the budget, then sampled through the fixed-size subset
// distribution. Requires tags on every token.
MaskPlan plan_tag_weighted(const corpus::TokenSequence& sentence, double content_weight,
                           double other_weight, double mask_ratio, std::size_t vocab_size,
                           RngStream& rng);

// Deterministic top-K positions by predictive entropy; ties keep the lower
// index. The RNG is only used for corruption.
MaskPlan plan_entropy(const corpus::TokenSequence& sentence, mlm::MlmModel& model,
                      double mask_ratio, std::size_t vocab_size, RngStream& rng);

// An adversarial plan keeps the sampling byproducts needed for the
// generator's gradient step: the distribution, the relaxed sample, and the
// probability node wired into the generator.
struct AdversarialPlan {
  MaskPlan plan;
  subset::SubsetDistribution distribution;
  subset::SampledSubset sample;
  nd::NodePtr pi;  // n x 1, differentiable into the generator only
};

// pi = generator(detached hidden states of the current model, eval mode);
// the subset comes from the relaxed sampler at the given temperature.
AdversarialPlan plan_adversarial(const corpus::TokenSequence& sentence,
                                 adversarial::PuzzleGenerator& generator,
                                 mlm::MlmModel& model, double mask_ratio, double temperature,
                                 std::size_t vocab_size, RngStream& rng);

// Dispatch by strategy, flipping the mixed coin first. Model and generator
// may be null for strategies that do not need them; a mismatch throws
// ConfigError. When the adversarial branch runs and adv_out is non-null, the
// full AdversarialPlan is moved there.
MaskPlan plan_sentence(const corpus::TokenSequence& sentence, const Strategy& strategy,
                       mlm::MlmModel* model, adversarial::PuzzleGenerator* generator,
                       double mask_ratio, double temperature, std::size_t vocab_size,
                       RngStream& rng, std::optional<AdversarialPlan>* adv_out = nullptr);

// 80% MASK / 10% random non-reserved token / 10% keep, independently per
// selected position.
MaskPlan corrupt(std::span<const std::size_t> ids, std::vector<std::size_t> subset,
                 std::size_t vocab_size, RngStream& rng);

}  // namespace advmask::masking
