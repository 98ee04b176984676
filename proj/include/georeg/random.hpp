#pragma once

#include <cstdint>
#include <limits>
#include <vector>

namespace georeg {

// SplitMix64. Chosen over the <random> engines+distributions because the
// distributions are implementation-defined; every sampling decision in the
// library goes through this generator so results are identical across
// standard libraries.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t v;
    do {
      v = (*this)();
    } while (v >= limit);
    return v % n;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller (one value per call).
  double normal();

 private:
  std::uint64_t state_;
};

// Independent stream for (seed, index). Used wherever work item `index` must
// draw the same numbers no matter which thread evaluates it.
SplitMix64 stream_for(std::uint64_t seed, std::uint64_t index);

// First `count` entries of a seeded Fisher-Yates shuffle of [0, n), returned
// in ascending order.
std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                    std::size_t count,
                                                    std::uint64_t seed);

}  // namespace georeg
