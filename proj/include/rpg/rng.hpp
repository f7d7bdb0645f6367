#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>

namespace rpg {

// Deterministic RNG with explicit Box-Muller so runs are reproducible
// byte-for-byte across builds regardless of libstdc++ distribution
// internals. Derive independent streams with child().
class Rng {
public:
  explicit Rng(uint64_t seed) : state_(splitmix(seed + 0x9e3779b97f4a7c15ull)) {}

  uint64_t next_u64() {
    // xorshift* generator.
    uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 0x2545f4914f6cdd1dull;
  }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586477 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Index sampled proportionally to the given non-negative weights.
  size_t categorical(std::span<const double> probs) {
    double total = 0.0;
    for (double p : probs) {
      if (p < 0.0) throw std::invalid_argument("negative category weight");
      total += p;
    }
    if (total <= 0.0) throw std::invalid_argument("zero-mass categorical");
    double u = uniform() * total;
    for (size_t i = 0; i < probs.size(); ++i) {
      u -= probs[i];
      if (u < 0.0) return i;
    }
    return probs.size() - 1;
  }

  size_t uniform_index(size_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index over empty range");
    return static_cast<size_t>(next_u64() % n);
  }

  Rng child(uint64_t tag) {
    return Rng(splitmix(state_ ^ (tag * 0xbf58476d1ce4e5b9ull)));
  }

private:
  static uint64_t splitmix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace rpg
