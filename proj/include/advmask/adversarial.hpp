#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "advmask/corpus.hpp"
#include "advmask/generator.hpp"
#include "advmask/masking.hpp"
#include "advmask/mlm.hpp"
#include "advmask/optim.hpp"
#include "advmask/rng.hpp"

namespace advmask::adversarial {

struct AdversarialConfig {
  double beta = 0.3;            // generator update frequency
  double mask_ratio = 0.15;
  std::size_t mc_samples = 1;   // masked sets sampled per sentence per step
  double temperature = 1.0;     // relaxed sampler temperature
  double model_lr = 5e-5;
  double generator_lr = 5e-5;
  std::size_t batch_size = 32;
  std::size_t max_steps = 0;
  bool per_sentence_beta = false;  // flip the beta coin per sentence, not per batch

  void validate() const;  // throws ConfigError
};

// Sum of negative log-likelihoods of the hidden tokens under the current
// model, evaluated without building gradient state for the model update.
// Always >= 0.
double reward(mlm::MlmModel& model, const masking::MaskPlan& plan);

// Exponential moving average of observed rewards. The first observation
// seeds the average, so its advantage is zero.
class RewardBaseline {
 public:
  explicit RewardBaseline(double decay = 0.99);

  // Returns r - baseline, then folds r into the average.
  double observe(double r);

  double value() const { return value_; }

 private:
  double decay_;
  double value_ = 0.0;
  bool seen_ = false;
};

// One ascent step on the advantage-weighted relaxed path log-probability,
// accumulated over the given plans. The plans' pi nodes must be wired into
// the generator parameters; a detached pi fails loudly.
void generator_step(PuzzleGenerator& generator, std::span<const masking::AdversarialPlan> plans,
                    std::span<const double> advantages, nd::Adam& optimizer);
void generator_step(PuzzleGenerator& generator, const masking::AdversarialPlan& plan,
                    double advantage, nd::Adam& optimizer);

struct StepMetrics {
  std::size_t step = 0;             // 1-based
  double mlm_loss = 0.0;            // batch mean of per-sentence mean NLL
  double reward_mean = 0.0;         // mean reward in this step's generator update; 0 when none
  double reward_baseline = 0.0;     // EMA value after this step
  double pi_mean = 0.0;             // over adversarial pi entries this step; 0 when none
  double pi_max = 0.0;
  double density_ratio_mean = 0.0;  // over masked ground-truth tokens; 0 without LMs
};

struct TrainResult {
  std::vector<StepMetrics> metrics;
  std::size_t generator_updates = 0;
};

// Alternating minimax loop: every step updates the model on a batch of
// masked sentences planned by the strategy; with probability beta the
// generator then takes an ascent step on the rewards of this batch's
// adversarial plans. Non-adversarial strategies run the same loop with the
// generator leg inert. Identical seeds give bitwise identical metrics.
TrainResult train_adversarial(std::span<const corpus::TokenSequence> sentences,
                              mlm::MlmModel& model, PuzzleGenerator* generator,
                              const masking::Strategy& strategy, const AdversarialConfig& config,
                              const corpus::UnigramLM* source_lm,
                              const corpus::UnigramLM* target_lm, std::uint64_t seed);

// Header plus one row per step; doubles printed with %.17g so equal runs
// produce identical bytes.
// Fixed CSV schema (version 1): the write_metrics_csv columns in order.
inline constexpr const char* kMetricsCsvHeader =
    "step,mlm_loss,reward_mean,reward_baseline,pi_mean,pi_max,density_ratio_mean";

void write_metrics_csv(const std::string& path, std::span<const StepMetrics> metrics);

struct VariationalGap {
  double max_nll = 0.0;       // worst subset, exhaustive
  double expected_nll = 0.0;  // exact expectation under q
};

// Enumerates every size-K subset (mask-only corruption) and compares the
// worst-case reconstruction loss with its expectation under the generator's
// subset distribution. The expectation can never exceed the max.
VariationalGap variational_gap(mlm::MlmModel& model, PuzzleGenerator& generator,
                               const corpus::TokenSequence& sentence, double mask_ratio,
                               std::size_t max_subsets = std::size_t{1} << 12);

}  // namespace advmask::adversarial
