#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace drn {

// splitmix64; used to mix seeds and derive independent per-item streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ull));
}

// Deterministic RNG wrapper. The standard distributions are implementation
// defined, so every mapping from raw bits to a value is spelled out here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  static Rng derived(std::uint64_t seed, std::uint64_t stream) {
    return Rng(mix_seed(seed, stream));
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

  bool bernoulli(double p) { return uniform() < p; }

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[uniform_int(i)]);
    }
  }

  // Sample m distinct values from [0, n) in draw order.
  std::vector<std::uint64_t> sample_distinct(std::uint64_t n, std::size_t m) {
    std::vector<std::uint64_t> out;
    out.reserve(m);
    while (out.size() < m) {
      std::uint64_t v = uniform_int(n);
      bool seen = false;
      for (std::uint64_t u : out) seen = seen || (u == v);
      if (!seen) out.push_back(v);
    }
    return out;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace drn
