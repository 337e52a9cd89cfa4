#include "advmask/subset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace advmask::subset {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Exact when either side is -inf: the other operand is returned unchanged,
// so downstream subtractions of identical expressions cancel bitwise.
double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double hi = std::max(a, b);
  double lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

}  // namespace

SelectionProbs::SelectionProbs(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw std::invalid_argument("SelectionProbs: empty probability vector");
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    double p = probs_[i];
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::invalid_argument("SelectionProbs: probs[" + std::to_string(i) +
                                  "] = " + std::to_string(p) + " outside [0, 1]");
    }
    probs_[i] = std::clamp(p, kClampEps, 1.0 - kClampEps);
  }
}

SubsetDistribution::SubsetDistribution(SelectionProbs probs, std::size_t cardinality)
    : probs_(std::move(probs)), cardinality_(cardinality) {
  std::size_t n = probs_.size();
  if (cardinality_ > n) {
    throw std::invalid_argument("SubsetDistribution: cardinality " + std::to_string(cardinality_) +
                                " exceeds " + std::to_string(n) + " positions");
  }
  log_pi_.resize(n);
  log_not_pi_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    log_pi_[i] = std::log(probs_[i]);
    log_not_pi_[i] = std::log1p(-probs_[i]);
  }
  table_.assign((n + 1) * (cardinality_ + 1), kNegInf);
  cell(n, 0) = 0.0;
  for (std::size_t j = n; j-- > 0;) {
    for (std::size_t k = 0; k <= cardinality_; ++k) {
      double skip = log_not_pi_[j] + cell(j + 1, k);
      double take = k > 0 ? log_pi_[j] + cell(j + 1, k - 1) : kNegInf;
      cell(j, k) = log_add(skip, take);
    }
  }
}

double SubsetDistribution::log_z(std::size_t j, std::size_t k) const {
  if (j > size() || k > cardinality_) {
    throw std::invalid_argument("SubsetDistribution: log_z index out of range");
  }
  return cell(j, k);
}

double SubsetDistribution::log_prob(std::span<const std::size_t> indices) const {
  if (indices.size() != cardinality_) {
    throw std::invalid_argument("SubsetDistribution: subset size " +
                                std::to_string(indices.size()) + " does not match cardinality " +
                                std::to_string(cardinality_));
  }
  std::vector<std::size_t> sorted(indices.begin(), indices.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  std::size_t s = 0;
  for (std::size_t i = 0; i < size(); ++i) {
    if (s < sorted.size() && sorted[s] == i) {
      if (s + 1 < sorted.size() && sorted[s + 1] == i) {
        throw std::invalid_argument("SubsetDistribution: duplicate index in subset");
      }
      sum += log_pi_[i];
      ++s;
    } else {
      sum += log_not_pi_[i];
    }
  }
  if (s != sorted.size()) {
    throw std::invalid_argument("SubsetDistribution: subset index out of range");
  }
  return sum - log_partition();
}

double SubsetDistribution::log_step_probability(std::size_t next_index,
                                                std::size_t already_chosen) const {
  std::size_t n = size();
  if (next_index >= n || already_chosen > cardinality_ || already_chosen > next_index) {
    throw std::invalid_argument("SubsetDistribution: invalid sequential state (index " +
                                std::to_string(next_index) + ", chosen " +
                                std::to_string(already_chosen) + ")");
  }
  std::size_t need = cardinality_ - already_chosen;
  if (need == 0) return kNegInf;
  if (need > n - next_index) {
    throw std::invalid_argument("SubsetDistribution: unreachable sequential state");
  }
  // Forced moves come out exact: when inclusion is the only continuation the
  // numerator reproduces the stored denominator bit for bit.
  return log_pi_[next_index] + cell(next_index + 1, need - 1) - cell(next_index, need);
}

double SubsetDistribution::step_probability(std::size_t next_index,
                                            std::size_t already_chosen) const {
  double lp = log_step_probability(next_index, already_chosen);
  if (lp == kNegInf) return 0.0;
  return std::exp(lp);
}

std::vector<double> SubsetDistribution::inclusion_probabilities() const {
  std::size_t n = size();
  std::size_t kmax = cardinality_;
  // Prefix analogue of the suffix table: fwd(i, k) is the log partition over
  // size-k subsets of {0..i-1}, with (1 - pi) factors for prefix positions
  // left out.
  std::vector<double> fwd((n + 1) * (kmax + 1), kNegInf);
  auto f = [&](std::size_t i, std::size_t k) -> double& { return fwd[i * (kmax + 1) + k]; };
  f(0, 0) = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k <= kmax; ++k) {
      double skip = log_not_pi_[i] + f(i, k);
      double take = k > 0 ? log_pi_[i] + f(i, k - 1) : kNegInf;
      f(i + 1, k) = log_add(skip, take);
    }
  }
  std::vector<double> incl(n, 0.0);
  if (kmax == 0) return incl;
  double logz = log_partition();
  for (std::size_t i = 0; i < n; ++i) {
    // Split every subset containing i by how many of its members precede i.
    double acc = kNegInf;
    for (std::size_t k = 0; k < kmax; ++k) {
      acc = log_add(acc, f(i, k) + log_pi_[i] + cell(i + 1, kmax - 1 - k));
    }
    incl[i] = std::exp(acc - logz);
  }
  return incl;
}

SubsetDistribution build_distribution(SelectionProbs probs, std::size_t cardinality) {
  return SubsetDistribution(std::move(probs), cardinality);
}

SampledSubset sample_hard(const SubsetDistribution& dist, RngStream& rng) {
  std::size_t n = dist.size();
  std::size_t kmax = dist.cardinality();
  SampledSubset out;
  out.indices.reserve(kmax);
  double logp = 0.0;
  std::size_t chosen = 0;
  for (std::size_t j = 0; j < n && chosen < kmax; ++j) {
    double q_yes = dist.step_probability(j, chosen);
    bool take = rng.uniform() < q_yes;
    out.decisions.push_back(take);
    if (take) {
      logp += dist.log_step_probability(j, chosen);
      out.indices.push_back(j);
      ++chosen;
    } else {
      logp += std::log1p(-q_yes);
    }
  }
  out.hard_log_prob = logp;
  out.relaxed_log_prob = logp;
  out.temperature = 0.0;
  return out;
}

namespace {

// Shared decision loop for sample_relaxed and replay_relaxed. draw_noise is
// called once per visited position, in order.
template <typename NoiseFn>
SampledSubset run_relaxed_path(const SubsetDistribution& dist, double temperature,
                               NoiseFn&& draw_noise) {
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("sample_relaxed: temperature must be positive, got " +
                                std::to_string(temperature));
  }
  std::size_t n = dist.size();
  std::size_t kmax = dist.cardinality();
  SampledSubset out;
  out.indices.reserve(kmax);
  out.temperature = temperature;
  double hard_logp = 0.0;
  double relaxed = 0.0;
  std::size_t chosen = 0;
  for (std::size_t j = 0; j < n && chosen < kmax; ++j) {
    double log_yes = dist.log_step_probability(j, chosen);
    double log_no = log_yes >= 0.0 ? kNegInf : std::log1p(-std::exp(log_yes));
    GumbelNoise g = draw_noise();
    out.noise.push_back(g);
    // Argmax over perturbed logits is exact for any temperature; the tempered
    // softmax only shapes the differentiable path value.
    bool take = log_yes + g.yes >= log_no + g.no;
    out.decisions.push_back(take);
    double t_yes = (log_yes + g.yes) / temperature;
    double t_no = (log_no + g.no) / temperature;
    double lse = log_add(t_yes, t_no);
    relaxed += (take ? t_yes : t_no) - lse;
    if (take) {
      hard_logp += log_yes;
      out.indices.push_back(j);
      ++chosen;
    } else {
      hard_logp += log_no;
    }
  }
  out.hard_log_prob = hard_logp;
  out.relaxed_log_prob = relaxed;
  return out;
}

}  // namespace

SampledSubset sample_relaxed(const SubsetDistribution& dist, double temperature, RngStream& rng) {
  return run_relaxed_path(dist, temperature, [&rng] {
    GumbelNoise g;
    g.yes = rng.gumbel();
    g.no = rng.gumbel();
    return g;
  });
}

SampledSubset replay_relaxed(const SubsetDistribution& dist, double temperature,
                             std::span<const GumbelNoise> noise) {
  std::size_t used = 0;
  auto out = run_relaxed_path(dist, temperature, [&noise, &used] {
    if (used >= noise.size()) {
      throw std::invalid_argument("replay_relaxed: noise record shorter than decision path");
    }
    return noise[used++];
  });
  return out;
}

std::vector<double> relaxed_path_grad(const SubsetDistribution& dist,
                                      const SampledSubset& sample) {
  if (!(sample.temperature > 0.0)) {
    throw std::invalid_argument("relaxed_path_grad: sample lacks a relaxed path (temperature 0)");
  }
  if (sample.noise.size() != sample.decisions.size()) {
    throw std::invalid_argument("relaxed_path_grad: noise/decision record mismatch");
  }
  std::size_t n = dist.size();
  std::size_t kmax = dist.cardinality();
  double tau = sample.temperature;
  // Accumulated gradients wrt log(pi_j) and log(1 - pi_j), plus adjoints of
  // the DP table cells feeding the visited step probabilities.
  std::vector<double> ga(n, 0.0);
  std::vector<double> gb(n, 0.0);
  std::vector<double> adj((n + 1) * (kmax + 1), 0.0);
  auto a_cell = [&](std::size_t j, std::size_t k) -> double& { return adj[j * (kmax + 1) + k]; };

  std::size_t chosen = 0;
  std::size_t j = 0;
  for (std::size_t v = 0; v < sample.decisions.size(); ++v, ++j) {
    if (j >= n || chosen >= kmax) {
      throw std::invalid_argument("relaxed_path_grad: decision record longer than any valid path");
    }
    std::size_t need = kmax - chosen;
    double log_yes = dist.log_step_probability(j, chosen);
    double log_no = log_yes >= 0.0 ? kNegInf : std::log1p(-std::exp(log_yes));
    bool take = sample.decisions[v];
    if (log_no == kNegInf) {
      // Forced (or fully saturated) inclusion: the softmax sits at a vertex,
      // zero local gradient.
      if (!take) throw std::invalid_argument("relaxed_path_grad: decision defies a forced move");
      ++chosen;
      continue;
    }
    double t_yes = (log_yes + sample.noise[v].yes) / tau;
    double t_no = (log_no + sample.noise[v].no) / tau;
    double lse = log_add(t_yes, t_no);
    double p_yes = std::exp(t_yes - lse);
    double p_no = std::exp(t_no - lse);
    double d_yes = ((take ? 1.0 : 0.0) - p_yes) / tau;
    // log_no = log(1 - exp(log_yes)): chain through to d log_yes.
    double d_no = ((take ? 0.0 : 1.0) - p_no) / tau;
    double d_log_yes = d_yes - d_no * std::exp(log_yes - log_no);
    // log_yes = log_pi[j] + T(j+1, need-1) - T(j, need)
    ga[j] += d_log_yes;
    a_cell(j + 1, need - 1) += d_log_yes;
    a_cell(j, need) -= d_log_yes;
    if (take) ++chosen;
  }

  // Reverse sweep: row j cells depend on row j + 1, so adjoints flow downward
  // in increasing j. Smoothed max gradient splits by branch responsibility.
  for (std::size_t row = 0; row < n; ++row) {
    for (std::size_t k = 0; k <= kmax; ++k) {
      double g = a_cell(row, k);
      if (g == 0.0) continue;
      double value = dist.cell(row, k);
      if (value == kNegInf) continue;
      double skip = dist.cell(row + 1, k);
      if (skip != kNegInf) {
        double sigma = std::exp(dist.log_not_pi_[row] + skip - value);
        gb[row] += g * sigma;
        a_cell(row + 1, k) += g * sigma;
      }
      if (k > 0) {
        double take_child = dist.cell(row + 1, k - 1);
        if (take_child != kNegInf) {
          double sigma = std::exp(dist.log_pi_[row] + take_child - value);
          ga[row] += g * sigma;
          a_cell(row + 1, k - 1) += g * sigma;
        }
      }
    }
  }

  std::vector<double> grad(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double pi = dist.probs()[i];
    grad[i] = ga[i] / pi - gb[i] / (1.0 - pi);
  }
  return grad;
}

std::vector<std::pair<std::vector<std::size_t>, double>> enumerate_support(
    const SelectionProbs& probs, std::size_t cardinality, std::size_t max_subsets) {
  std::size_t n = probs.size();
  if (cardinality > n) {
    throw std::invalid_argument("enumerate_support: cardinality exceeds position count");
  }
  // C(n, K) with saturation at max_subsets + 1.
  double count = 1.0;
  for (std::size_t i = 0; i < cardinality; ++i) {
    count = count * static_cast<double>(n - i) / static_cast<double>(i + 1);
    if (count > static_cast<double>(max_subsets) + 0.5) {
      throw std::invalid_argument("enumerate_support: support size exceeds cap of " +
                                  std::to_string(max_subsets) + " subsets");
    }
  }
  std::vector<std::pair<std::vector<std::size_t>, double>> out;
  std::vector<std::size_t> combo(cardinality);
  for (std::size_t i = 0; i < cardinality; ++i) combo[i] = i;
  double total = 0.0;
  while (true) {
    double w = 1.0;
    std::size_t s = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (s < combo.size() && combo[s] == i) {
        w *= probs[i];
        ++s;
      } else {
        w *= 1.0 - probs[i];
      }
    }
    out.emplace_back(combo, w);
    total += w;
    // Advance to the next combination in lexicographic order.
    std::size_t pos = cardinality;
    while (pos > 0 && combo[pos - 1] == n - cardinality + pos - 1) --pos;
    if (pos == 0) break;
    ++combo[pos - 1];
    for (std::size_t i = pos; i < cardinality; ++i) combo[i] = combo[i - 1] + 1;
  }
  for (auto& entry : out) entry.second /= total;
  return out;
}

}  // namespace advmask::subset
