#ifndef GRNN_RNG_HPP
#define GRNN_RNG_HPP

#include <cstdint>
#include <random>

namespace grnn {

// uniform in [0, 1) from the top 53 bits; avoids libstdc++-specific
// distribution implementations so streams are reproducible everywhere
inline double next_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double next_uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * next_uniform(rng);
}

inline int64_t next_index(std::mt19937_64& rng, int64_t n) {
  return static_cast<int64_t>(rng() % static_cast<uint64_t>(n));
}

}  // namespace grnn

#endif  // GRNN_RNG_HPP
