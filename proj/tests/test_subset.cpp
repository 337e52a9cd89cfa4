#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

#include "advmask/rng.hpp"
#include "advmask/stats.hpp"
#include "advmask/subset.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace advmask::subset;
using advmask::RngStream;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> random_probs(RngStream& rng, std::size_t n, double lo = 0.05,
                                 double hi = 0.95) {
  std::vector<double> p(n);
  for (auto& v : p) v = rng.uniform(lo, hi);
  return p;
}

double total_step_log_prob(const SubsetDistribution& dist, const SampledSubset& s) {
  double sum = 0.0;
  std::size_t chosen = 0;
  for (std::size_t v = 0; v < s.decisions.size(); ++v) {
    double log_yes = dist.log_step_probability(v, chosen);
    if (s.decisions[v]) {
      sum += log_yes;
      ++chosen;
    } else {
      sum += std::log1p(-std::exp(log_yes));
    }
  }
  return sum;
}

}  // namespace

TEST_CASE("construction validates and clamps") {
  CHECK_THROWS_AS(SelectionProbs(std::vector<double>{}), std::invalid_argument);
  CHECK_THROWS_AS(SelectionProbs({0.5, -0.1}), std::invalid_argument);
  CHECK_THROWS_AS(SelectionProbs({1.5}), std::invalid_argument);
  CHECK_THROWS_AS(SelectionProbs({std::nan("")}), std::invalid_argument);

  SelectionProbs edge({0.0, 1.0, 0.5});
  CHECK(edge[0] == SelectionProbs::kClampEps);
  CHECK(edge[1] == 1.0 - SelectionProbs::kClampEps);
  CHECK(edge[2] == 0.5);

  CHECK_THROWS_AS(SubsetDistribution(SelectionProbs({0.5, 0.5}), 3), std::invalid_argument);
}

TEST_CASE("partition function matches frozen hand computations") {
  // q~ weights for pi = [.1 .2 .3 .4], K = 2:
  //   {0,1} .0084  {0,2} .0144  {0,3} .0224
  //   {1,2} .0324  {1,3} .0504  {2,3} .0864   sum .2144
  SubsetDistribution dist(SelectionProbs({0.1, 0.2, 0.3, 0.4}), 2);
  CHECK(std::exp(dist.log_partition()) == doctest::Approx(0.2144).epsilon(1e-12));

  // K = 0 leaves only the all-excluded product.
  SubsetDistribution empty(SelectionProbs({0.2, 0.3}), 0);
  CHECK(std::exp(empty.log_partition()) == doctest::Approx(0.56).epsilon(1e-12));

  // Suffix boundary rows.
  CHECK(dist.log_z(4, 0) == 0.0);
  CHECK(dist.log_z(4, 1) == -kInf);
  CHECK(dist.log_z(4, 2) == -kInf);
  // log_z(j, 0) accumulates the leave-out factors of the suffix.
  CHECK(std::exp(dist.log_z(2, 0)) == doctest::Approx(0.7 * 0.6).epsilon(1e-12));
}

TEST_CASE("partition function matches the enumeration oracle across sizes") {
  RngStream rng(2026, "partition-sweep");
  int draws = 0;
  for (std::size_t n = 1; n <= 12; ++n) {
    for (std::size_t k = 0; k <= n; ++k) {
      auto p = random_probs(rng, n);
      SubsetDistribution dist(SelectionProbs(p), k);
      double z = testutil::oracle_partition(p, k);
      CHECK(std::exp(dist.log_partition()) == doctest::Approx(z).epsilon(1e-10));
      ++draws;
    }
  }
  CHECK(draws == 90);
}

TEST_CASE("log_prob matches frozen values and the oracle") {
  std::vector<double> p{0.1, 0.2, 0.3, 0.4};
  SubsetDistribution dist(SelectionProbs(p), 2);
  std::vector<std::size_t> mode{2, 3};
  CHECK(dist.log_prob(mode) == doctest::Approx(std::log(0.0864 / 0.2144)).epsilon(1e-12));

  auto support = testutil::oracle_weights(p, 2);
  double z = testutil::oracle_partition(p, 2);
  for (const auto& [set, w] : support) {
    CHECK(dist.log_prob(set) == doctest::Approx(std::log(w / z)).epsilon(1e-12));
  }

  // Order of indices must not matter.
  std::vector<std::size_t> swapped{3, 2};
  CHECK(dist.log_prob(swapped) == dist.log_prob(mode));

  std::vector<std::size_t> wrong_size{1};
  CHECK_THROWS_AS(dist.log_prob(wrong_size), std::invalid_argument);
  std::vector<std::size_t> dup{1, 1};
  CHECK_THROWS_AS(dist.log_prob(dup), std::invalid_argument);
  std::vector<std::size_t> oob{1, 7};
  CHECK_THROWS_AS(dist.log_prob(oob), std::invalid_argument);
}

TEST_CASE("equal selection probabilities make every subset equally likely") {
  SubsetDistribution dist(SelectionProbs(std::vector<double>(4, 0.37)), 2);
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = a + 1; b < 4; ++b) {
      std::vector<std::size_t> s{a, b};
      CHECK(dist.log_prob(s) == doctest::Approx(std::log(1.0 / 6.0)).epsilon(1e-12));
    }
  }
  CHECK(dist.step_probability(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("step probabilities: frozen value, boundaries, invalid states") {
  SubsetDistribution dist(SelectionProbs({0.1, 0.2, 0.3, 0.4}), 2);
  // pi_0 * Z(1, 1) / Z(0, 2) with Z(1, 1) = .084 + .144 + .224 = .452.
  CHECK(dist.step_probability(0, 0) == doctest::Approx(0.1 * 0.452 / 0.2144).epsilon(1e-12));

  // Quota filled: exactly zero, no tolerance.
  CHECK(dist.step_probability(2, 2) == 0.0);
  CHECK(dist.log_step_probability(2, 2) == -kInf);

  // Forced tail: exactly one.
  SubsetDistribution forced(SelectionProbs({0.5, 0.25}), 2);
  CHECK(forced.step_probability(0, 0) == 1.0);
  CHECK(forced.step_probability(1, 1) == 1.0);
  SubsetDistribution tail(SelectionProbs({0.9, 0.1, 0.8}), 2);
  // After skipping position 0, both remaining positions are forced.
  CHECK(tail.step_probability(1, 0) == 1.0);
  CHECK(tail.step_probability(2, 1) == 1.0);

  CHECK_THROWS_AS(dist.step_probability(4, 0), std::invalid_argument);   // index out of range
  CHECK_THROWS_AS(dist.step_probability(0, 1), std::invalid_argument);   // chosen > index
  CHECK_THROWS_AS(dist.step_probability(3, 0), std::invalid_argument);   // needs 2, one slot left
  CHECK_THROWS_AS(dist.step_probability(3, 3), std::invalid_argument);   // chosen > K
}

TEST_CASE("hard sampling telescopes to the subset log probability") {
  RngStream rng(99, "chain");
  for (int rep = 0; rep < 50; ++rep) {
    std::size_t n = 3 + rng.uniform_index(8);
    std::size_t k = 1 + rng.uniform_index(n);
    auto p = random_probs(rng, n);
    SubsetDistribution dist(SelectionProbs(p), k);
    auto s = sample_hard(dist, rng);
    REQUIRE(s.indices.size() == k);
    CHECK(s.temperature == 0.0);
    CHECK(s.relaxed_log_prob == s.hard_log_prob);
    CHECK(s.hard_log_prob == doctest::Approx(dist.log_prob(s.indices)).epsilon(1e-9));
    CHECK(total_step_log_prob(dist, s) == doctest::Approx(dist.log_prob(s.indices)).epsilon(1e-9));
  }
}

TEST_CASE("hard sampler matches enumerated probabilities (chi-square)") {
  RngStream seed_rng(7, "probs");
  auto p = random_probs(seed_rng, 6, 0.25, 0.75);
  SelectionProbs probs(p);
  SubsetDistribution dist(probs, 3);
  auto support = enumerate_support(probs, 3);
  REQUIRE(support.size() == 20);

  std::map<std::vector<std::size_t>, int> counts;
  RngStream rng(123, "sampler-exactness");
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) {
    auto s = sample_hard(dist, rng);
    ++counts[s.indices];
  }
  double stat = 0.0;
  for (const auto& [set, prob] : support) {
    double expected = prob * draws;
    REQUIRE(expected > 5.0);
    auto it = counts.find(set);
    double observed = it == counts.end() ? 0.0 : it->second;
    stat += (observed - expected) * (observed - expected) / expected;
  }
  CHECK(advmask::stats::chi_square_sf(stat, 19.0) > 1e-4);
}

TEST_CASE("relaxed sampling draws from the same law as hard sampling") {
  RngStream seed_rng(8, "probs");
  auto p = random_probs(seed_rng, 6, 0.25, 0.75);
  SelectionProbs probs(p);
  SubsetDistribution dist(probs, 3);
  auto support = enumerate_support(probs, 3);

  std::map<std::vector<std::size_t>, int> counts;
  RngStream rng(456, "gumbel-equivalence");
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) {
    auto s = sample_relaxed(dist, 0.7, rng);
    REQUIRE(s.indices.size() == 3);
    ++counts[s.indices];
  }
  double stat = 0.0;
  for (const auto& [set, prob] : support) {
    double expected = prob * draws;
    auto it = counts.find(set);
    double observed = it == counts.end() ? 0.0 : it->second;
    stat += (observed - expected) * (observed - expected) / expected;
  }
  CHECK(advmask::stats::chi_square_sf(stat, 19.0) > 1e-4);
}

TEST_CASE("temperature shapes the path value but never the decisions") {
  RngStream rng(31, "temp");
  auto p = random_probs(rng, 9);
  SubsetDistribution dist(SelectionProbs(p), 4);
  auto s = sample_relaxed(dist, 0.5, rng);
  auto warm = replay_relaxed(dist, 5.0, s.noise);
  CHECK(warm.indices == s.indices);
  CHECK(warm.decisions == s.decisions);
  CHECK(warm.hard_log_prob == s.hard_log_prob);
  CHECK(warm.relaxed_log_prob != s.relaxed_log_prob);

  CHECK_THROWS_AS(sample_relaxed(dist, 0.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_relaxed(dist, -1.0, rng), std::invalid_argument);
}

TEST_CASE("replay reproduces a relaxed sample bit for bit") {
  RngStream rng(17, "replay");
  auto p = random_probs(rng, 8);
  SubsetDistribution dist(SelectionProbs(p), 3);
  auto s = sample_relaxed(dist, 1.0, rng);
  auto r = replay_relaxed(dist, 1.0, s.noise);
  CHECK(r.indices == s.indices);
  CHECK(r.decisions == s.decisions);
  CHECK(r.hard_log_prob == s.hard_log_prob);
  CHECK(r.relaxed_log_prob == s.relaxed_log_prob);

  std::vector<GumbelNoise> truncated(s.noise.begin(), s.noise.end() - 1);
  bool threw = false;
  try {
    replay_relaxed(dist, 1.0, truncated);
  } catch (const std::invalid_argument&) {
    threw = true;
  }
  // Dropping the last record only matters if the path actually visits it.
  CHECK((threw || s.decisions.size() < s.noise.size()));
}

TEST_CASE("relaxed path gradient matches central finite differences") {
  RngStream rng(2718, "fd");
  const double h = 1e-5;
  struct Case {
    std::size_t n;
    std::size_t k;
    double tau;
  };
  for (Case c : {Case{6, 2, 1.0}, Case{8, 3, 0.5}, Case{5, 4, 2.0}, Case{7, 1, 1.0}}) {
    auto p = random_probs(rng, c.n);
    SubsetDistribution dist(SelectionProbs(p), c.k);
    auto s = sample_relaxed(dist, c.tau, rng);
    auto grad = relaxed_path_grad(dist, s);
    REQUIRE(grad.size() == c.n);
    for (std::size_t i = 0; i < c.n; ++i) {
      auto plus = p;
      plus[i] += h;
      auto minus = p;
      minus[i] -= h;
      auto s_plus = replay_relaxed(SubsetDistribution(SelectionProbs(plus), c.k), c.tau, s.noise);
      auto s_minus = replay_relaxed(SubsetDistribution(SelectionProbs(minus), c.k), c.tau, s.noise);
      REQUIRE(s_plus.decisions == s.decisions);
      REQUIRE(s_minus.decisions == s.decisions);
      double fd = (s_plus.relaxed_log_prob - s_minus.relaxed_log_prob) / (2.0 * h);
      if (std::abs(fd) > 1e-5) {
        CHECK(std::abs(grad[i] - fd) / std::abs(fd) < 1e-4);
      } else {
        CHECK(std::abs(grad[i] - fd) < 1e-8);
      }
    }
  }
}

TEST_CASE("a fully forced path carries no gradient") {
  SubsetDistribution dist(SelectionProbs({0.3, 0.6, 0.2}), 3);
  RngStream rng(1, "forced");
  auto s = sample_relaxed(dist, 1.0, rng);
  CHECK(s.indices == std::vector<std::size_t>{0, 1, 2});
  CHECK(s.relaxed_log_prob == 0.0);
  CHECK(s.hard_log_prob == 0.0);
  auto grad = relaxed_path_grad(dist, s);
  for (double g : grad) CHECK(g == 0.0);
}

TEST_CASE("inclusion probabilities match frozen marginals and sum to K") {
  std::vector<double> p{0.1, 0.2, 0.3, 0.4};
  SubsetDistribution dist(SelectionProbs(p), 2);
  auto incl = dist.inclusion_probabilities();
  REQUIRE(incl.size() == 4);
  CHECK(incl[0] == doctest::Approx(0.0452 / 0.2144).epsilon(1e-12));
  CHECK(incl[1] == doctest::Approx(0.0912 / 0.2144).epsilon(1e-12));
  CHECK(incl[2] == doctest::Approx(0.1332 / 0.2144).epsilon(1e-12));
  CHECK(incl[3] == doctest::Approx(0.1592 / 0.2144).epsilon(1e-12));

  RngStream rng(55, "incl");
  for (int rep = 0; rep < 20; ++rep) {
    std::size_t n = 2 + rng.uniform_index(9);
    std::size_t k = rng.uniform_index(n + 1);
    auto q = random_probs(rng, n);
    SubsetDistribution d(SelectionProbs(q), k);
    auto got = d.inclusion_probabilities();
    auto want = testutil::oracle_inclusion(q, k);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-9));
      sum += got[i];
    }
    CHECK(sum == doctest::Approx(static_cast<double>(k)).epsilon(1e-9));
  }
}

TEST_CASE("enumerate_support normalizes and respects the cap") {
  std::vector<double> p{0.1, 0.2, 0.3, 0.4};
  auto support = enumerate_support(SelectionProbs(p), 2);
  REQUIRE(support.size() == 6);
  auto oracle = testutil::oracle_weights(p, 2);
  double z = testutil::oracle_partition(p, 2);
  double total = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) {
    CHECK(support[i].first == oracle[i].first);
    CHECK(support[i].second == doctest::Approx(oracle[i].second / z).epsilon(1e-12));
    total += support[i].second;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  // C(25, 12) = 5200300 blows the default cap of 2^20.
  SelectionProbs big(std::vector<double>(25, 0.5));
  CHECK_THROWS_AS(enumerate_support(big, 12), std::invalid_argument);
  // A tighter explicit cap trips earlier.
  CHECK_THROWS_AS(enumerate_support(SelectionProbs(p), 2, 5), std::invalid_argument);
}
