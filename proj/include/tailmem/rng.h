#ifndef TAILMEM_RNG_H_
#define TAILMEM_RNG_H_

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <vector>

namespace tailmem {

// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr uint64_t Mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives a child key from a parent key and a path of stream/counter words.
// DeriveKey(seed, {kSubsetStream, k}) is the key of trial k's subset draw.
constexpr uint64_t DeriveKey(uint64_t key, std::initializer_list<uint64_t> path) {
  uint64_t h = Mix64(key);
  for (const uint64_t word : path) h = Mix64(h ^ Mix64(word + 0x632be59bd9b4e019ULL));
  return h;
}

// Counter-based generator: the i-th output is Mix64(key, i). No hidden global
// state, so any (key, counter) pair reproduces the same stream on any platform.
// Gaussian and uniform draws are implemented here rather than via <random>
// distributions, whose algorithms are implementation-defined.
class KeyedRng {
 public:
  explicit KeyedRng(uint64_t key) : key_(Mix64(key)) {}

  uint64_t NextU64() { return Mix64(key_ ^ Mix64(counter_++)); }

  // Uniform in [0, 1) with 53 random bits.
  double Uniform() { return static_cast<double>(NextU64() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1].
  double UniformOpenLow() { return (static_cast<double>(NextU64() >> 11) + 1.0) * 0x1.0p-53; }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Unbiased integer in [0, bound) (Lemire's multiply-shift with rejection).
  uint64_t Below(uint64_t bound) {
    unsigned __int128 product = static_cast<unsigned __int128>(NextU64()) * bound;
    uint64_t low = static_cast<uint64_t>(product);
    if (low < bound) {
      const uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        product = static_cast<unsigned __int128>(NextU64()) * bound;
        low = static_cast<uint64_t>(product);
      }
    }
    return static_cast<uint64_t>(product >> 64);
  }

  // Standard normal via Box-Muller; the second variate of each pair is kept.
  double Normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double radius = std::sqrt(-2.0 * std::log(UniformOpenLow()));
    const double angle = 2.0 * std::numbers::pi * Uniform();
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  template <typename T>
  void Shuffle(std::vector<T>& values) {
    for (size_t i = values.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(Below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  uint64_t key_;
  uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stream tags used with DeriveKey.
inline constexpr uint64_t kSubsetStream = 1;
inline constexpr uint64_t kLearnerStream = 2;
inline constexpr uint64_t kRemovalStream = 3;
inline constexpr uint64_t kRepetitionStream = 4;

}  // namespace tailmem

#endif  // TAILMEM_RNG_H_
