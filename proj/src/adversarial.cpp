#include "advmask/adversarial.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "advmask/errors.hpp"
#include "advmask/subset.hpp"

namespace advmask::adversarial {

void AdversarialConfig::validate() const {
  if (beta < 0.0 || beta > 1.0) {
    throw ConfigError("beta must be in [0, 1], got " + std::to_string(beta));
  }
  if (mask_ratio <= 0.0 || mask_ratio > 1.0) {
    throw ConfigError("mask_ratio must be in (0, 1], got " + std::to_string(mask_ratio));
  }
  if (mc_samples == 0) throw ConfigError("mc_samples must be at least 1");
  if (temperature <= 0.0) {
    throw ConfigError("temperature must be positive, got " + std::to_string(temperature));
  }
  if (model_lr <= 0.0 || generator_lr <= 0.0) {
    throw ConfigError("learning rates must be positive");
  }
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (max_steps == 0) throw ConfigError("max_steps must be at least 1");
}

double reward(mlm::MlmModel& model, const masking::MaskPlan& plan) {
  auto fwd = model.forward(plan.corrupted_ids, false, nullptr);
  auto nll = model.masked_nll(fwd, plan.subset, plan.ground_truth, nd::Reduction::Sum);
  return nll->value.item();
}

RewardBaseline::RewardBaseline(double decay) : decay_(decay) {
  if (decay < 0.0 || decay >= 1.0) {
    throw ConfigError("baseline decay must be in [0, 1), got " + std::to_string(decay));
  }
}

double RewardBaseline::observe(double r) {
  if (!seen_) {
    seen_ = true;
    value_ = r;
    return 0.0;
  }
  double advantage = r - value_;
  value_ = decay_ * value_ + (1.0 - decay_) * r;
  return advantage;
}

void generator_step(PuzzleGenerator& generator, std::span<const masking::AdversarialPlan> plans,
                    std::span<const double> advantages, nd::Adam& optimizer) {
  if (plans.size() != advantages.size()) {
    throw std::invalid_argument("generator_step: plans and advantages must pair up");
  }
  if (plans.empty()) return;
  optimizer.zero_grad();
  double norm = 1.0 / static_cast<double>(plans.size());
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const masking::AdversarialPlan& plan = plans[i];
    if (plan.pi == nullptr || !plan.pi->requires_grad || plan.pi->inputs.empty()) {
      throw std::logic_error(
          "generator_step: pi carries no gradient path into the generator parameters");
    }
    std::vector<double> dpi = subset::relaxed_path_grad(plan.distribution, plan.sample);
    nd::Tensor seed(dpi.size(), 1);
    // Ascent on advantage * l; the optimizer descends, hence the sign flip.
    for (std::size_t j = 0; j < dpi.size(); ++j) {
      seed.at(j, 0) = -advantages[i] * dpi[j] * norm;
    }
    nd::backward_with_grad(plan.pi, seed);
  }
  nd::clip_global_norm(generator.parameters(), 1.0);
  optimizer.step();
}

void generator_step(PuzzleGenerator& generator, const masking::AdversarialPlan& plan,
                    double advantage, nd::Adam& optimizer) {
  generator_step(generator, {&plan, 1}, {&advantage, 1}, optimizer);
}

TrainResult train_adversarial(std::span<const corpus::TokenSequence> sentences,
                              mlm::MlmModel& model, PuzzleGenerator* generator,
                              const masking::Strategy& strategy, const AdversarialConfig& config,
                              const corpus::UnigramLM* source_lm,
                              const corpus::UnigramLM* target_lm, std::uint64_t seed) {
  config.validate();
  if (sentences.empty()) throw DataError("train_adversarial: empty corpus");
  if (strategy.needs_generator() && generator == nullptr) {
    throw ConfigError("strategy '" + masking::strategy_name(strategy) + "' needs a generator");
  }
  if ((source_lm == nullptr) != (target_lm == nullptr)) {
    throw ConfigError("density tracking needs both unigram models or neither");
  }

  std::size_t vocab = model.config().vocab_size;
  RngStream order_rng(seed, "order");
  RngStream mask_rng(seed, "mask");
  RngStream dropout_rng(seed, "dropout");
  RngStream beta_rng(seed, "beta");

  nd::Adam model_opt(model.parameters(), {.learning_rate = config.model_lr});
  std::optional<nd::Adam> gen_opt;
  if (generator != nullptr) {
    gen_opt.emplace(generator->parameters(), nd::Adam::Config{.learning_rate = config.generator_lr});
  }
  RewardBaseline baseline;

  std::vector<std::size_t> order(sentences.size());
  std::iota(order.begin(), order.end(), 0);
  order_rng.shuffle(order);
  std::size_t cursor = 0;

  TrainResult result;
  result.metrics.reserve(config.max_steps);

  for (std::size_t step = 1; step <= config.max_steps; ++step) {
    std::vector<masking::AdversarialPlan> adv_plans;
    std::vector<masking::MaskPlan> batch_plans;
    nd::NodePtr total;
    std::size_t plan_count = 0;

    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const corpus::TokenSequence& sentence = sentences[order[cursor]];
      if (++cursor == order.size()) {
        cursor = 0;
        order_rng.shuffle(order);
      }
      for (std::size_t m = 0; m < config.mc_samples; ++m) {
        std::optional<masking::AdversarialPlan> adv;
        masking::MaskPlan plan =
            masking::plan_sentence(sentence, strategy, &model, generator, config.mask_ratio,
                                   config.temperature, vocab, mask_rng, &adv);
        auto fwd = model.forward(plan.corrupted_ids, true, &dropout_rng);
        auto loss = model.masked_nll(fwd, plan.subset, plan.ground_truth, nd::Reduction::Mean);
        total = total == nullptr ? loss : nd::add(total, loss);
        ++plan_count;
        if (adv.has_value()) adv_plans.push_back(std::move(*adv));
        batch_plans.push_back(std::move(plan));
      }
    }

    auto batch_loss = nd::scale(total, 1.0 / static_cast<double>(plan_count));
    double loss_value = batch_loss->value.item();
    if (!std::isfinite(loss_value)) {
      throw NumericError("training diverged at step " + std::to_string(step) +
                         ": batch loss is not finite");
    }
    model_opt.zero_grad();
    nd::backward(batch_loss);
    nd::clip_global_norm(model.parameters(), 1.0);
    model_opt.step();

    StepMetrics row;
    row.step = step;
    row.mlm_loss = loss_value;
    if (!adv_plans.empty()) {
      double pi_sum = 0.0;
      double pi_max = 0.0;
      std::size_t pi_count = 0;
      for (const auto& adv : adv_plans) {
        for (std::size_t i = 0; i < adv.pi->value.rows(); ++i) {
          double v = adv.pi->value.at(i, 0);
          pi_sum += v;
          pi_max = std::max(pi_max, v);
          ++pi_count;
        }
      }
      row.pi_mean = pi_sum / static_cast<double>(pi_count);
      row.pi_max = pi_max;
    }
    if (source_lm != nullptr && target_lm != nullptr) {
      double ratio_sum = 0.0;
      std::size_t ratio_count = 0;
      for (const auto& plan : batch_plans) {
        for (std::size_t id : plan.ground_truth) {
          ratio_sum += corpus::density_ratio(*source_lm, *target_lm, id);
          ++ratio_count;
        }
      }
      row.density_ratio_mean = ratio_count == 0 ? 0.0 : ratio_sum / static_cast<double>(ratio_count);
    }

    if (generator != nullptr && !adv_plans.empty()) {
      std::vector<masking::AdversarialPlan> fired;
      if (config.per_sentence_beta) {
        for (auto& adv : adv_plans) {
          if (beta_rng.uniform() < config.beta) fired.push_back(std::move(adv));
        }
      } else if (beta_rng.uniform() < config.beta) {
        fired = std::move(adv_plans);
      }
      if (!fired.empty()) {
        std::vector<double> advantages;
        advantages.reserve(fired.size());
        double reward_sum = 0.0;
        for (const auto& adv : fired) {
          double r = reward(model, adv.plan);
          reward_sum += r;
          advantages.push_back(baseline.observe(r));
        }
        generator_step(*generator, fired, advantages, *gen_opt);
        row.reward_mean = reward_sum / static_cast<double>(fired.size());
        ++result.generator_updates;
      }
    }
    row.reward_baseline = baseline.value();
    result.metrics.push_back(row);
  }
  return result;
}

void write_metrics_csv(const std::string& path, std::span<const StepMetrics> metrics) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write metrics file: " + path);
  out << kMetricsCsvHeader << '\n';
  char buf[512];
  for (const StepMetrics& m : metrics) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", m.step,
                  m.mlm_loss, m.reward_mean, m.reward_baseline, m.pi_mean, m.pi_max,
                  m.density_ratio_mean);
    out << buf;
  }
  if (!out) throw DataError("failed writing metrics file: " + path);
}

VariationalGap variational_gap(mlm::MlmModel& model, PuzzleGenerator& generator,
                               const corpus::TokenSequence& sentence, double mask_ratio,
                               std::size_t max_subsets) {
  std::size_t n = sentence.ids.size();
  std::size_t k = masking::mask_budget(n, mask_ratio);
  auto fwd = model.forward(sentence.ids, false, nullptr);
  auto pi = generator.forward(nd::detach(fwd.hidden), false, nullptr);
  std::vector<double> probs(n);
  for (std::size_t i = 0; i < n; ++i) probs[i] = pi->value.at(i, 0);
  auto support = subset::enumerate_support(subset::SelectionProbs(std::move(probs)), k, max_subsets);

  VariationalGap gap;
  gap.max_nll = -std::numeric_limits<double>::infinity();
  double expected = 0.0;
  for (const auto& [indices, q] : support) {
    std::vector<std::size_t> corrupted(sentence.ids.begin(), sentence.ids.end());
    std::vector<std::size_t> truth;
    truth.reserve(indices.size());
    for (std::size_t idx : indices) {
      truth.push_back(corrupted[idx]);
      corrupted[idx] = corpus::Vocabulary::kMask;
    }
    auto f = model.forward(corrupted, false, nullptr);
    double nll = model.masked_nll(f, indices, truth, nd::Reduction::Sum)->value.item();
    gap.max_nll = std::max(gap.max_nll, nll);
    expected += q * nll;
  }
  gap.expected_nll = expected;
  if (gap.expected_nll > gap.max_nll + 1e-9 * (1.0 + std::abs(gap.max_nll))) {
    throw NumericError("variational bound violated: expectation " +
                       std::to_string(gap.expected_nll) + " exceeds max " +
                       std::to_string(gap.max_nll));
  }
  return gap;
}

}  // namespace advmask::adversarial
