#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace tubelet::core {

// splitmix64: the mixing function behind all randomness in the toolkit.
// Self-contained so that streams are reproducible across platforms and
// independent of standard-library distribution internals.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent sub-stream seed from a master seed and salts.
// Sub-seeds depend only on (seed, salts), never on execution order.
inline uint64_t derive_seed(uint64_t seed, uint64_t salt_a, uint64_t salt_b = 0) {
  uint64_t h = splitmix64(seed ^ 0x6a09e667f3bcc908ULL);
  h = splitmix64(h ^ salt_a);
  h = splitmix64(h ^ (salt_b + 0x3c6ef372fe94f82bULL));
  return h;
}

// Sequential deterministic generator.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(splitmix64(seed ^ 0x1234567812345678ULL)) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; consumes exactly two uniforms per draw.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Uniform integer in [0, n).
  uint64_t uniform_int(uint64_t n) { return next_u64() % n; }

 private:
  uint64_t state_;
};

// Fisher-Yates with our own generator; std::shuffle ordering is
// implementation-defined and would break log reproducibility.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng.uniform_int(i));
    std::swap(v[i - 1], v[j]);
  }
}

// Counter-based gaussian field value: pure function of (seed, counter), so
// noise fields can be recomputed independently in tests.
inline double counter_normal(uint64_t seed, uint64_t counter) {
  uint64_t a = splitmix64(seed ^ splitmix64(counter * 2 + 1));
  uint64_t b = splitmix64(seed ^ splitmix64(counter * 2 + 2));
  double u1 = static_cast<double>(a >> 11) * 0x1.0p-53;
  double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace tubelet::core
