#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace silan {

// Deterministic random source. mt19937_64 supplies the bits; the uniform and
// normal mappings are done by hand because the standard <random> distributions
// are implementation-defined and would break bit-for-bit reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; consumes a fresh pair of uniforms per call.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Independent child stream. Depends only on the construction seed and the
  // salt, never on how much of this stream has already been consumed.
  Rng split(std::uint64_t salt) const { return Rng(mix(seed_, salt)); }

  std::uint64_t seed() const { return seed_; }

  // hash_combine-style mixing with a splitmix64 finalizer
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

// In-place Fisher-Yates shuffle.
inline void shuffle_indices(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace silan
