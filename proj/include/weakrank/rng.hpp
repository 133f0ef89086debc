#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace weakrank {

// All randomized steps in the pipeline draw from mt19937_64 through the
// helpers below. The engine is fully specified by the standard; the std
// distributions are not, so we avoid them to keep outputs identical across
// standard libraries.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)), base_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Unbiased bounded draw in [0, n) by rejection.
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::next_below: n must be > 0");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform double in [lo, hi).
  double next_double(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  bool next_bool(double p_true) { return next_double() < p_true; }

  // Derive an independent stream, e.g. one per query or per epoch.
  Rng fork(std::uint64_t stream) const {
    return Rng(splitmix64(base_ ^ splitmix64(stream)));
  }

  static Rng forked(std::uint64_t seed, std::uint64_t stream) {
    return Rng(seed).fork(stream);
  }

 private:
  std::mt19937_64 engine_;
  std::uint64_t base_ = 0;
};

// In-place Fisher-Yates. std::shuffle is implementation-defined, this is not.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace weakrank
