#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace advmask {

// Deterministic xoshiro256** stream with hand-rolled distribution
// transforms, so sequences are reproducible across standard library
// implementations. All randomness in the project flows from a single
// master seed split into named streams (data, masking, gumbel, dropout,
// init) so components can be varied independently.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);
  RngStream(std::uint64_t master_seed, std::string_view stream_name);

  std::uint64_t next_u64();

  // Uniform on [0, 1).
  double uniform();
  // Uniform on (0, 1); safe as input to log().
  double uniform_open();
  double uniform(double lo, double hi);
  // Box-Muller normal.
  double normal(double mean = 0.0, double stddev = 1.0);
  // Standard Gumbel(0, 1): -log(-log(U)), U in (0, 1).
  double gumbel();
  // Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);
  bool bernoulli(double p);

  template <class T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      const std::size_t j = uniform_index(i + 1);
      std::swap(v[i], v[j]);
    }
  }

 private:
  std::array<std::uint64_t, 4> state_{};
};

// Stable 64-bit hash of a stream name, used to derive per-stream seeds.
std::uint64_t hash_stream_name(std::string_view name);

}  // namespace advmask
