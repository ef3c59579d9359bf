#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace latentnav {

// Deterministic RNG. The mt19937_64 stream is standardized bit-for-bit; all
// distribution mappings are implemented here so results do not depend on the
// standard library's distribution internals.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller with a cached spare.
  double normal();

  double normal(double mean, double std) { return mean + std * normal(); }

  // Uniform integer in [lo, hi], inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi);

  // Fisher-Yates index permutation helper.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

  // splitmix64-style combiner for deriving sub-stream seeds.
  static uint64_t mix(uint64_t a, uint64_t b);
  static uint64_t hash_str(const std::string& s);  // FNV-1a 64

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace latentnav
