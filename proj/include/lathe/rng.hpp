#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace lathe {

// SplitMix64 finalizer. Used only to derive stream seeds, never as the
// sampling generator itself.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Master seed plus a stream id. Identical (seed, stream) pairs reproduce
/// identical output bit for bit; distinct streams are decorrelated by hashing.
struct RngSeed {
  std::uint64_t master = 0;
  std::uint64_t stream = 0;

  constexpr RngSeed() = default;
  constexpr explicit RngSeed(std::uint64_t m, std::uint64_t s = 0) : master(m), stream(s) {}

  /// Child stream: hash of (this stream, path...). Order of the path matters.
  constexpr RngSeed derive(std::initializer_list<std::uint64_t> path) const {
    std::uint64_t h = splitmix64(master ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
    for (std::uint64_t k : path) h = splitmix64(h ^ splitmix64(k + 0x8CB92BA72F3D8DD7ULL));
    return RngSeed{master, h};
  }

  constexpr std::uint64_t state() const {
    return splitmix64(master ^ splitmix64(stream));
  }

  friend constexpr bool operator==(const RngSeed&, const RngSeed&) = default;
};

using Rng = std::mt19937_64;

inline Rng make_rng(const RngSeed& seed) { return Rng{seed.state()}; }

/// Bernoulli(prob) from one 64-bit draw. Avoids std::bernoulli_distribution so
/// streams are identical across standard library implementations.
class BernoulliThreshold {
 public:
  explicit BernoulliThreshold(double prob) {
    if (prob <= 0.0) {
      threshold_ = 0;
    } else if (prob >= 1.0) {
      threshold_ = ~std::uint64_t{0};
      always_ = true;
    } else {
      // prob * 2^64, exact enough for the 53 bits of a double.
      threshold_ = static_cast<std::uint64_t>(prob * 18446744073709551616.0);
    }
  }
  bool operator()(Rng& rng) const { return always_ || rng() < threshold_; }

 private:
  std::uint64_t threshold_ = 0;
  bool always_ = false;
};

inline bool fair_coin(Rng& rng) { return (rng() >> 63) != 0; }

// Multiply-shift range reduction; bias is below 2^-40 for bound < 2^24.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(rng()) * bound) >> 64);
}

inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace lathe
