#ifndef SEGEN_RNG_H
#define SEGEN_RNG_H

#include <cstdint>
#include <random>

namespace segen {

// Deterministic RNG wrapper. std::mt19937_64 output is pinned by the
// standard, and we map bits to doubles ourselves so that sequences are
// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : eng_(seed) {}

  uint64_t next() { return eng_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(eng_() % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& xs) {
    for (size_t i = xs.size(); i > 1; --i) {
      size_t j = eng_() % i;
      std::swap(xs[i - 1], xs[j]);
    }
  }

  // Stable derivation of per-instance stream seeds.
  static uint64_t mix(uint64_t a, uint64_t b, uint64_t c = 0) {
    uint64_t x = a * 0x9e3779b97f4a7c15ull + b;
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x += c;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace segen

#endif
