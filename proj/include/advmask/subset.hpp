#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "advmask/rng.hpp"

namespace advmask::subset {

// Per-position selection probabilities, clamped away from {0, 1} so that
// log(pi) and log(1 - pi) stay finite.
class SelectionProbs {
 public:
  static constexpr double kClampEps = 1e-6;

  explicit SelectionProbs(std::vector<double> probs);

  std::size_t size() const { return probs_.size(); }
  const std::vector<double>& values() const { return probs_; }
  double operator[](std::size_t i) const { return probs_[i]; }

 private:
  std::vector<double> probs_;
};

struct GumbelNoise {
  double yes = 0.0;
  double no = 0.0;
};

// A concrete size-K sample with its exact log-probability, the relaxed path
// log-probability used for gradient estimation, and the noise record needed
// to replay the draw.
struct SampledSubset {
  std::vector<std::size_t> indices;  // strictly increasing positions
  double hard_log_prob = 0.0;        // log q(S)
  double relaxed_log_prob = 0.0;     // path value l; equals hard_log_prob for hard samples
  double temperature = 0.0;          // softmax temperature; 0 marks an exact (hard) sample
  std::vector<bool> decisions;       // include/skip per visited position
  std::vector<GumbelNoise> noise;    // per visited position; empty for hard samples
};

// Distribution over all size-K subsets S of positions {0..n-1}:
//
//   q(S) = prod_{i in S} pi_i * prod_{i not in S} (1 - pi_i) / Z
//
// The table log_z(j, k) holds the log partition over subsets of size k drawn
// from the suffix {j..n-1}, including the (1 - pi) factors of suffix
// positions left out. So log_z(n, 0) = 0, log_z(j, 0) = sum of log(1 - pi)
// over the suffix, and log_z(0, K) = log Z. Built right to left in
// O(K * n) time and memory; immutable afterwards and safe to share across
// concurrent readers.
class SubsetDistribution {
 public:
  SubsetDistribution(SelectionProbs probs, std::size_t cardinality);

  std::size_t size() const { return probs_.size(); }
  std::size_t cardinality() const { return cardinality_; }
  const SelectionProbs& probs() const { return probs_; }

  // log Z over the full index range.
  double log_partition() const { return cell(0, cardinality_); }
  // Suffix table entry; j in [0, n], k in [0, K]. -inf encodes Z = 0.
  double log_z(std::size_t j, std::size_t k) const;

  // log q(S) for a size-K index set. Indices must be distinct and in range.
  double log_prob(std::span<const std::size_t> indices) const;

  // Probability of including position next_index given already_chosen picks
  // among positions before it. Exactly 1 in remaining-equals-needed states
  // and exactly 0 once the quota is filled.
  double step_probability(std::size_t next_index, std::size_t already_chosen) const;
  // Same quantity in log space (-inf when the quota is filled).
  double log_step_probability(std::size_t next_index, std::size_t already_chosen) const;

  // Pr[i in S] for every position; entries sum to K.
  std::vector<double> inclusion_probabilities() const;

 private:
  double cell(std::size_t j, std::size_t k) const { return table_[j * (cardinality_ + 1) + k]; }
  double& cell(std::size_t j, std::size_t k) { return table_[j * (cardinality_ + 1) + k]; }

  SelectionProbs probs_;
  std::size_t cardinality_ = 0;
  std::vector<double> log_pi_;
  std::vector<double> log_not_pi_;
  std::vector<double> table_;  // (n + 1) x (K + 1), row-major

  friend std::vector<double> relaxed_path_grad(const SubsetDistribution&, const SampledSubset&);
};

SubsetDistribution build_distribution(SelectionProbs probs, std::size_t cardinality);

// Draws S exactly from q via the sequential decision process.
SampledSubset sample_hard(const SubsetDistribution& dist, RngStream& rng);

// Gumbel-argmax sampling: each binary decision comes from the noisy argmax
// (so the hard sample is exact for any temperature), while the accumulated
// path value l uses the tempered log-softmax and is differentiable in pi.
SampledSubset sample_relaxed(const SubsetDistribution& dist, double temperature, RngStream& rng);

// Re-runs the relaxed decision path under a fixed noise record.
SampledSubset replay_relaxed(const SubsetDistribution& dist, double temperature,
                             std::span<const GumbelNoise> noise);

// d relaxed_log_prob / d pi_i with the noise record held fixed. The sample
// must come from sample_relaxed or replay_relaxed.
std::vector<double> relaxed_path_grad(const SubsetDistribution& dist, const SampledSubset& sample);

// Brute-force support enumeration with normalized probabilities; the number
// of subsets C(n, K) must not exceed max_subsets. Independent of the DP.
std::vector<std::pair<std::vector<std::size_t>, double>> enumerate_support(
    const SelectionProbs& probs, std::size_t cardinality,
    std::size_t max_subsets = (1u << 20));

}  // namespace advmask::subset
