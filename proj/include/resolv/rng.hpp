#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace resolv {

// Deterministic random stream. All distribution transforms are implemented
// arithmetically on top of the raw mt19937_64 output so that sequences are
// reproducible across standard library implementations, which do not pin
// their distribution algorithms.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(mix(seed)) {}

  // Independent substream for item `index` of a batch keyed by `seed`.
  // Lets callers generate batch items in any order (or in parallel) while
  // keeping the result a pure function of (seed, index).
  static Rng child(uint64_t seed, uint64_t index) {
    return Rng(mix(seed) ^ mix(index + 0x9e3779b97f4a7c15ull));
  }

  uint64_t next() { return gen_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform integer in [lo, hi], inclusive. Modulo bias is below 2^-53 for
  // any span this project uses.
  int uniform_int(int lo, int hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next() % span);
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Geometric with support {0, 1, ...} and mean (1-p)/p.
  int geometric0(double p) {
    if (p >= 1.0) return 0;
    double u = uniform01();
    return static_cast<int>(std::floor(std::log1p(-u) / std::log1p(-p)));
  }

  // Uniform in [-s, s].
  double uniform_sym(double s) { return (2.0 * uniform01() - 1.0) * s; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = next() % i;
      std::swap(v[i - 1], v[j]);
    }
  }

  // Sample k distinct values from [1, n] without replacement.
  std::vector<int> sample_distinct(int n, int k) {
    std::vector<int> pool(n);
    for (int i = 0; i < n; ++i) pool[i] = i + 1;
    std::vector<int> out;
    out.reserve(k);
    for (int i = 0; i < k; ++i) {
      int j = uniform_int(i, n - 1);
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
    return out;
  }

 private:
  // splitmix64 finalizer; decorrelates nearby seeds.
  static uint64_t mix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::mt19937_64 gen_;
};

}  // namespace resolv
