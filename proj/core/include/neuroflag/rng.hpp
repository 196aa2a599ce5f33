#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace neuroflag {

/// Independent child seed for substream `stream` (splitmix64 finalizer).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seedable pseudo-random source shared by initialization, shuffling and dropout.
///
/// Wraps std::mt19937_64. Draws are derived from raw engine output rather than
/// std distributions where bit-exact replay matters (uniform()), so a saved
/// state replays identically.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed), seeded_(true) {}

  /// Engine seeded from std::random_device. Functions that must be replayable
  /// (gradcheck) reject these.
  static Rng unseeded() {
    std::random_device rd;
    Rng r(static_cast<std::uint64_t>(rd()) << 32 | rd());
    r.seeded_ = false;
    return r;
  }

  bool is_seeded() const noexcept { return seeded_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller on uniform().
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  /// Normal(0, stddev) resampled until it lies within +-2 stddev.
  double truncated_normal(double stddev) {
    for (;;) {
      const double z = normal();
      if (z > -2.0 && z < 2.0) return z * stddev;
    }
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const auto k = static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

  std::mt19937_64& engine() { return engine_; }

  /// Textual engine state; restoring it with `restore` continues the exact stream.
  std::string serialize() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }
  void restore(const std::string& state) {
    std::istringstream is(state);
    is >> engine_;
    seeded_ = true;
  }

 private:
  std::mt19937_64 engine_;
  bool seeded_;
};

}  // namespace neuroflag
