#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fiadd {

// xoshiro256** seeded through splitmix64. Every derived distribution below is
// implemented here rather than taken from <random>, whose distributions are
// implementation-defined; a seed therefore produces the same stream on every
// platform and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 random bits.
  double uniform();

  // Uniform integer in [0, n). Lemire's multiply-shift with rejection.
  std::size_t below(std::size_t n);

  // Standard normal via the Marsaglia polar method.
  double normal();

  // Index drawn with probability proportional to weights. Requires a
  // positive finite total.
  std::size_t weighted(std::span<const double> weights);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace fiadd
