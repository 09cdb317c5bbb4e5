#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace pssl {

// Every run owns a single master seed. Each stochastic consumer derives its
// own stream as a splitmix64 chain over (master, purpose, index), so any
// component is reproducible in isolation: the parameter init, the augmenter,
// the shuffle of epoch e, or the clustering of round r can each be replayed
// without running anything else.
namespace stream_purpose {
inline constexpr std::uint64_t kInit = 1;       // parameter initialization
inline constexpr std::uint64_t kAugment = 2;    // view generation (one stream, consumed in batch order)
inline constexpr std::uint64_t kShuffle = 3;    // index = epoch
inline constexpr std::uint64_t kCluster = 4;    // index = pseudo-label round
inline constexpr std::uint64_t kHead = 5;       // index = round of classifier (re)init
inline constexpr std::uint64_t kEvalSplit = 6;  // train/test split for evaluation
inline constexpr std::uint64_t kProbe = 7;      // index 0 = probe init, 1+epoch = probe shuffles
inline constexpr std::uint64_t kSynth = 8;      // synthetic dataset generation
}  // namespace stream_purpose

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic random stream. Distribution sampling is implemented here (not
// via <random> distributions) so the byte streams are identical across
// standard library implementations, not just across runs.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t purpose, std::uint64_t index = 0)
      : gen_(splitmix64(splitmix64(splitmix64(master_seed) ^ purpose) ^ index)) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal, Box-Muller cosine branch; consumes two words per draw.
  double normal() {
    const double u1 = static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.28318530717958647692 * u2);
  }

  std::size_t uniform_index(std::size_t n) {
    const std::size_t i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_index(i)]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace pssl
