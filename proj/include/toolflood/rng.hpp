#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace toolflood {

inline constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;

inline std::uint64_t fnv1a64(std::string_view data,
                             std::uint64_t state = kFnvOffsetBasis) {
  for (unsigned char c : data) {
    state ^= c;
    state *= kFnvPrime;
  }
  return state;
}

inline std::uint64_t fnv1a64_mix(std::uint64_t value, std::uint64_t state) {
  for (int i = 0; i < 8; ++i) {
    state ^= (value >> (8 * i)) & 0xff;
    state *= kFnvPrime;
  }
  return state;
}

// Deterministic RNG. All randomness in the project flows from a single root
// seed through named substreams, so components can be re-run in isolation
// and results do not depend on call order elsewhere. Sampling helpers avoid
// std::*_distribution, whose output is not pinned by the standard.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng substream(std::uint64_t root, std::string_view name) {
    return Rng(root ^ fnv1a64(name));
  }

  static Rng substream(std::uint64_t root, std::string_view name,
                       std::uint64_t index) {
    return Rng(root ^ fnv1a64_mix(index, fnv1a64(name)));
  }

  std::uint64_t next_u64() { return engine_(); }

  // Unbiased integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n) {
    const std::uint64_t span = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t draw;
    do {
      draw = engine_();
    } while (draw >= limit);
    return static_cast<std::size_t>(draw % span);
  }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform_real() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return uniform_real() < p; }

  // k distinct indices from [0, n), uniform over k-subsets. Partial
  // Fisher-Yates; the returned order is the sampling order.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k && i < n; ++i) {
      std::size_t j = i + uniform_index(n - i);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k < n ? k : n);
    return idx;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace toolflood
